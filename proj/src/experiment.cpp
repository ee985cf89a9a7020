#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

#include "masga/errors.hpp"
#include "masga/io.hpp"

namespace masga {

namespace {

bool is_logistic(const std::string& model) {
  return model == "logistic_gaussian" || model == "logistic_mixture";
}

std::unique_ptr<DriftModel> make_model(const ExperimentConfig& c,
                                       std::shared_ptr<const Dataset> data) {
  if (c.model == "logistic_gaussian") return std::make_unique<LogisticModel>(data, PriorKind::kGaussian);
  if (c.model == "logistic_mixture") return std::make_unique<LogisticModel>(data, PriorKind::kMixture);
  if (c.model == "gaussian_mixture_2d") return std::make_unique<MixtureModel>(data, c.mixture_variance);
  return std::make_unique<OuModel>(data, c.ou_alpha);
}

Vec initial_state(const ExperimentConfig& c, const DriftModel& model) {
  const auto d = static_cast<Eigen::Index>(model.dimension());
  if (c.x0 == "origin") return Vec::Zero(d);
  if (c.x0 == "sgd_mode") {
    return approximate_mode(model, Vec::Zero(d), c.mode_iterations,
                            c.mode_step / static_cast<double>(model.m()));
  }
  std::vector<double> values;
  std::stringstream ss(c.x0);
  std::string cell;
  while (std::getline(ss, cell, ',')) values.push_back(std::stod(cell));
  if (static_cast<Eigen::Index>(values.size()) != d) {
    throw ConfigError("x0 has " + std::to_string(values.size()) + " entries, model dimension is " +
                      std::to_string(d));
  }
  return Eigen::Map<const Vec>(values.data(), d);
}

// f at the terminal state of the control-variate chain.
class ControlVariateSampler final : public LevelSampler {
 public:
  ControlVariateSampler(const DriftModel& model, TestFunction f, ChainSpec spec, Vec x_hat, Vec x0,
                        std::uint64_t seed)
      : model_(model), cv_(model, std::move(x_hat)), f_(f), spec_(spec), x0_(std::move(x0)), seed_(seed) {}

  double sample(MultiIndex, std::uint64_t path) const override {
    return f_(simulate_cv_chain(cv_, model_, spec_, PathKey{seed_, 0, 0, path}, x0_)
                  .final_state.position);
  }
  double cost_per_path(MultiIndex) const override {
    return static_cast<double>(spec_.n_steps * 2 * spec_.s);
  }
  ActiveIndices active() const override { return {false, false}; }
  void check_admissible(MultiIndex) const override {}

 private:
  const DriftModel& model_;
  ControlVariateDrift cv_;
  TestFunction f_;
  ChainSpec spec_;
  Vec x0_;
  std::uint64_t seed_;
};

// Plain Monte Carlo at one level: pilot, then N = max(n_pilot, V / eps^2),
// the same variance budget the adaptive estimators use.
EstimatorReport single_level_report(const LevelSampler& sampler, MultiIndex level, double eps,
                                    const ExperimentConfig& c) {
  LevelStats stats;
  stats.level = level;
  top_up(sampler, stats, c.n_pilot, c.threads);
  const double target = std::ceil(stats.variance() / (eps * eps));
  top_up(sampler, stats, std::max<std::uint64_t>(c.n_pilot, static_cast<std::uint64_t>(target)),
         c.threads);
  EstimatorReport r;
  r.estimate = stats.mean;
  r.std_error = stats.std_error();
  r.total_cost = stats.total_cost();
  r.allocations[level] = stats.n;
  r.bias_estimate = std::numeric_limits<double>::quiet_NaN();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  r.rates = FittedRates{{nan, nan}, {nan, nan}, {nan, nan}};
  r.converged = true;
  r.levels_used = std::max(level.ell1, level.ell2);
  r.stats = {stats};
  return r;
}

}  // namespace

Dataset experiment_dataset(const ExperimentConfig& c) {
  if (!c.dataset.empty()) {
    if (!std::filesystem::exists(c.dataset)) {
      throw std::runtime_error("dataset file '" + c.dataset + "' does not exist");
    }
    LoadOptions options;
    options.labelled = is_logistic(c.model);
    options.standardize = is_logistic(c.model);
    return load_dataset(c.dataset, options);
  }
  SyntheticSpec spec;
  spec.m = c.m;
  spec.d = c.d;
  spec.seed = c.data_seed;
  spec.mixture_variance = c.mixture_variance;
  if (is_logistic(c.model)) {
    spec.kind = SyntheticKind::kLogistic;
  } else if (c.model == "gaussian_mixture_2d") {
    spec.kind = SyntheticKind::kMixture;
    spec.d = 2;
  } else {
    spec.kind = SyntheticKind::kOu;
  }
  return gen_synthetic(spec);
}

ExperimentResult run_experiment(const ExperimentConfig& c, const std::string& out_dir) {
  c.validate();
  auto data = std::make_shared<const Dataset>(experiment_dataset(c));
  const auto model = make_model(c, data);
  const TestFunction f = TestFunction::parse(c.f);
  const Vec x0 = initial_state(c, *model);

  LevelHierarchy hierarchy;
  hierarchy.s0 = c.s0;
  hierarchy.h0 = c.h0;
  hierarchy.n0 = c.n0();
  hierarchy.beta = std::isnan(c.beta) ? model->default_beta() : c.beta;
  hierarchy.mode = c.mode;

  std::unique_ptr<LevelSampler> sampler;
  MultiIndex single_level{c.mc_level, c.mc_level};
  if (c.estimator == "masga") {
    sampler = std::make_unique<ClusterSampler>(*model, f, hierarchy, x0, c.seed, ActiveIndices{true, true});
  } else if (c.estimator == "mimc_plain") {
    sampler = std::make_unique<ClusterSampler>(*model, f, hierarchy, x0, c.seed,
                                               ActiveIndices{true, true}, Coupling::kPlain);
  } else if (c.estimator == "amlmc_sub") {
    sampler = std::make_unique<ClusterSampler>(*model, f, hierarchy, x0, c.seed, ActiveIndices{true, false});
  } else if (c.estimator == "amlmc_disc") {
    sampler = std::make_unique<ClusterSampler>(*model, f, hierarchy, x0, c.seed, ActiveIndices{false, true});
  } else if (c.estimator == "mc") {
    sampler = std::make_unique<SingleChainSampler>(*model, f, hierarchy, x0, c.seed);
    sampler->check_admissible(single_level);
  } else {
    const ChainSpec spec{hierarchy.s(c.mc_level), hierarchy.h0, hierarchy.n0, hierarchy.beta, c.mode};
    const Vec x_hat = approximate_mode(*model, Vec::Zero(x0.size()), c.mode_iterations,
                                       c.mode_step / static_cast<double>(model->m()));
    sampler = std::make_unique<ControlVariateSampler>(*model, f, spec, x_hat, x0, c.seed);
    single_level = MultiIndex{c.mc_level, 0};
  }

  ExperimentResult result;
  for (double eps : c.epsilons) {
    EstimatorReport report;
    if (c.estimator == "mc" || c.estimator == "sgld_cv") {
      report = single_level_report(*sampler, single_level, eps, c);
    } else {
      const AdaptiveConfig ac{eps, c.n_pilot, c.L_init, c.L_max, c.alpha_assumed, c.threads};
      report = run_adaptive(*sampler, ac);
    }
    if (!report.converged) result.exit_code = 2;
    result.convergence.push_back({eps, report.estimate, report.total_cost, report.levels_used});
    result.final_report = std::move(report);
  }

  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);
  const auto open = [&](const char* name) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
    return out;
  };
  {
    auto out = open("levels.csv");
    write_levels_csv(out, result.final_report.stats);
  }
  {
    auto out = open("convergence.csv");
    write_convergence_csv(out, result.convergence);
  }
  {
    auto out = open("report.json");
    out << report_to_json(result.final_report);
  }
  return result;
}

}  // namespace masga
