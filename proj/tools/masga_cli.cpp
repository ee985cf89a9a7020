// Command-line driver: run experiments, fit rates, generate data, run the
// oracle checks and compare couplings.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>

#include "masga/adaptive.hpp"
#include "masga/errors.hpp"
#include "masga/io.hpp"
#include "masga/oracles.hpp"

namespace {

using namespace masga;

ExperimentConfig resolve_config(const std::string& config_path, const std::string& preset_name) {
  if (!preset_name.empty()) {
    ExperimentConfig c = preset(preset_name);
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw ConfigError("cannot open config file '" + config_path + "'");
      std::stringstream rest;
      rest << "preset = " << preset_name << '\n' << in.rdbuf();
      c = parse_config(rest);
    }
    return c;
  }
  if (config_path.empty()) throw ConfigError("give a config file or --preset");
  return load_config(config_path);
}

int cmd_run(const std::string& config_path, const std::string& preset_name,
            const std::vector<double>& eps, std::optional<std::uint64_t> seed,
            const std::string& out, std::optional<unsigned> threads) {
  ExperimentConfig c = resolve_config(config_path, preset_name);
  if (!eps.empty()) c.epsilons = eps;
  if (seed) c.seed = *seed;
  if (threads) c.threads = *threads;
  const ExperimentResult r = run_experiment(c, out);
  std::cout << format_summary(r.final_report);
  std::cout << "wrote " << out << "/levels.csv, convergence.csv, report.json\n";
  if (r.exit_code == 2) std::cerr << "stopped at L_max before the bias target was met\n";
  return r.exit_code;
}

int cmd_rates(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open levels file '" + path + "'");
  const auto stats = read_levels_csv(in);
  ActiveIndices active{false, false};
  for (const auto& s : stats) {
    active.subsampling = active.subsampling || s.level.ell1 > 0;
    active.time = active.time || s.level.ell2 > 0;
  }
  const FittedRates r = fit_rates(stats, active);
  std::printf("alpha_hat = (%.4g, %.4g)\nbeta_hat  = (%.4g, %.4g)\ngamma     = (%.4g, %.4g)\n",
              r.alpha[0], r.alpha[1], r.beta[0], r.beta[1], r.gamma[0], r.gamma[1]);
  std::vector<double> a;
  std::vector<double> b;
  std::vector<double> g;
  for (std::size_t k = 0; k < 2; ++k) {
    if ((k == 0 && !active.subsampling) || (k == 1 && !active.time)) continue;
    a.push_back(r.alpha[k]);
    b.push_back(r.beta[k]);
    g.push_back(r.gamma[k]);
  }
  bool ok = false;
  try {
    ok = check_complexity_condition(a, b, g);
  } catch (const std::invalid_argument& e) {
    std::printf("complexity condition: undefined (%s)\n", e.what());
    return 0;
  }
  std::printf("complexity condition max_k (gamma_k - beta_k) / alpha_k < 0: %s\n",
              ok ? "true" : "false");
  return 0;
}

int cmd_gen(const std::string& kind, std::size_t m, std::size_t d, std::uint64_t seed,
            const std::string& out) {
  SyntheticSpec spec;
  spec.kind = synthetic_kind_from_string(kind);
  spec.m = m;
  spec.d = spec.kind == SyntheticKind::kMixture ? 2 : d;
  spec.seed = seed;
  const Dataset data = gen_synthetic(spec);
  if (out.empty() || out == "-") {
    write_dataset_csv(std::cout, data);
  } else {
    std::ofstream file(out, std::ios::binary);
    if (!file) throw std::runtime_error("cannot write '" + out + "'");
    write_dataset_csv(file, data);
  }
  return 0;
}

int cmd_compare(const std::string& config_path, const std::string& preset_name, std::uint32_t L,
                std::uint64_t paths, const std::string& out, unsigned threads) {
  ExperimentConfig c = resolve_config(config_path, preset_name);
  c.validate();
  auto data = std::make_shared<const Dataset>(experiment_dataset(c));
  std::unique_ptr<DriftModel> model;
  if (c.model == "logistic_gaussian" || c.model == "logistic_mixture") {
    model = std::make_unique<LogisticModel>(
        data, c.model == "logistic_gaussian" ? PriorKind::kGaussian : PriorKind::kMixture);
  } else if (c.model == "gaussian_mixture_2d") {
    model = std::make_unique<MixtureModel>(data, c.mixture_variance);
  } else {
    model = std::make_unique<OuModel>(data, c.ou_alpha);
  }
  const auto d = static_cast<Eigen::Index>(model->dimension());
  const Vec x0 = c.x0 == "origin" ? Vec::Zero(d)
                                  : approximate_mode(*model, Vec::Zero(d), c.mode_iterations,
                                                     c.mode_step / static_cast<double>(model->m()));
  LevelHierarchy h{c.s0, c.h0, c.n0(), std::isnan(c.beta) ? model->default_beta() : c.beta, c.mode};
  ActiveIndices active{c.estimator != "amlmc_disc", c.estimator != "amlmc_sub"};
  const TestFunction f = TestFunction::parse(c.f);
  const ClusterSampler ant(*model, f, h, x0, c.seed, active, Coupling::kAntithetic);
  const ClusterSampler plain(*model, f, h, x0, c.seed, active, Coupling::kPlain);
  const SingleChainSampler single(*model, f, h, x0, c.seed);

  std::ofstream file;
  if (!out.empty() && out != "-") {
    file.open(out, std::ios::binary);
    if (!file) throw std::runtime_error("cannot write '" + out + "'");
  }
  std::ostream& os = file.is_open() ? static_cast<std::ostream&>(file) : std::cout;
  os << "ell1,ell2,var_antithetic,var_plain,var_level,mean_antithetic,mean_plain\n";
  for (const auto& level : level_set(L, active)) {
    ant.check_admissible(level);
    LevelStats a;
    LevelStats p;
    LevelStats s;
    a.level = p.level = s.level = level;
    top_up(ant, a, paths, threads);
    top_up(plain, p, paths, threads);
    top_up(single, s, paths, threads);
    char buf[256];
    std::snprintf(buf, sizeof buf, "%u,%u,%.17g,%.17g,%.17g,%.17g,%.17g\n", level.ell1, level.ell2,
                  a.variance(), p.variance(), s.variance(), a.mean, p.mean);
    os << buf;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MASGA: multi-index antithetic stochastic gradient estimators"};
  app.require_subcommand(1);

  std::string config_path;
  std::string preset_name;
  std::vector<double> eps;
  std::uint64_t seed = 0;
  std::string out = "results";
  unsigned threads = 0;

  auto* run = app.add_subcommand("run", "run an experiment from a key=value config file");
  run->add_option("config", config_path, "config file");
  run->add_option("--preset", preset_name, "start from a named preset")
      ->check(CLI::IsMember(preset_names()));
  run->add_option("--eps", eps, "epsilon values (overrides the config)")->delimiter(',');
  auto* seed_opt = run->add_option("--seed", seed, "master seed");
  run->add_option("--out", out, "output directory")->capture_default_str();
  auto* threads_opt = run->add_option("--threads", threads, "worker threads (0 = all cores)");

  std::string levels_path;
  auto* rates = app.add_subcommand("rates", "fit alpha, beta, gamma from a levels.csv");
  rates->add_option("levels", levels_path, "levels.csv")->required();

  std::string kind = "logistic";
  std::size_t m = 1000;
  std::size_t d = 5;
  std::uint64_t data_seed = 1;
  std::string data_out;
  auto* gen = app.add_subcommand("gen-data", "write a synthetic data set as CSV");
  gen->add_option("--kind", kind, "logistic | mixture | ou")->capture_default_str();
  gen->add_option("--m", m, "number of rows")->capture_default_str();
  gen->add_option("--d", d, "number of features")->capture_default_str();
  gen->add_option("--seed", data_seed, "generator seed")->capture_default_str();
  gen->add_option("--out", data_out, "output file (stdout when omitted)");

  std::uint64_t oracle_paths = 20000;
  auto* oracle = app.add_subcommand("oracle", "run the closed-form and enumeration checks");
  oracle->add_option("--paths", oracle_paths, "Monte Carlo paths for the OU check")
      ->capture_default_str();

  std::uint32_t compare_L = 3;
  std::uint64_t compare_paths = 2000;
  std::string compare_out;
  auto* compare = app.add_subcommand("compare", "antithetic vs plain level variances as CSV");
  compare->add_option("config", config_path, "config file");
  compare->add_option("--preset", preset_name, "start from a named preset")
      ->check(CLI::IsMember(preset_names()));
  compare->add_option("--L", compare_L, "finest level")->capture_default_str();
  compare->add_option("--paths", compare_paths, "paths per level")->capture_default_str();
  compare->add_option("--out", compare_out, "output file (stdout when omitted)");
  compare->add_option("--threads", threads, "worker threads (0 = all cores)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      std::optional<std::uint64_t> s;
      std::optional<unsigned> t;
      if (*seed_opt) s = seed;
      if (*threads_opt) t = threads;
      return cmd_run(config_path, preset_name, eps, s, out, t);
    }
    if (*rates) return cmd_rates(levels_path);
    if (*gen) return cmd_gen(kind, m, d, data_seed, data_out);
    if (*oracle) return run_oracle_checks(std::cout, oracle_paths) ? 0 : 1;
    if (*compare) return cmd_compare(config_path, preset_name, compare_L, compare_paths, compare_out, threads);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
