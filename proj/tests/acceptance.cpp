// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include <unistd.h>

#include "masga/adaptive.hpp"
#include "masga/errors.hpp"
#include "masga/io.hpp"
#include "masga/oracles.hpp"
#include "test_support.hpp"

namespace {

using namespace masga;
namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir =
      fs::temp_directory_path() / ("masga_accept_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Desk-scale logistic regression: m = 1000, d = 5, s0 = 4, h0 = 0.005,
// 100 steps, started at the approximate posterior mode.
struct DeskLogistic {
  std::shared_ptr<const Dataset> data = testing::logistic_data(1000, 5, 1);
  LogisticModel model{data, PriorKind::kGaussian};
  LevelHierarchy hierarchy{4, 0.005, 100, model.default_beta(), ReplacementMode::kWithout};
  Vec x0 = approximate_mode(model, Vec::Zero(5), 500, 1.0 / 1000);
};

ExperimentConfig desk_config() {
  ExperimentConfig c = preset("logistic-small");
  c.threads = 1;
  return c;
}

double slope(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0;
  double my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / static_cast<double>(x.size());
    my += y[i] / static_cast<double>(y.size());
  }
  double sxy = 0;
  double sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

Outcome criterion1() {
  const auto data = std::make_shared<const Dataset>([] {
    SyntheticSpec s;
    s.kind = SyntheticKind::kOu;
    s.m = 64;
    s.d = 1;
    s.seed = 5;
    return gen_synthetic(s);
  }());
  double worst = 0;
  std::size_t checked = 0;
  for (double alpha : {0.0, 1.0}) {
    const OuModel model(data, alpha);
    LevelHierarchy h{2, 0.1, 10, model.default_beta(), ReplacementMode::kWith};
    const ClusterSampler sampler(model, TestFunction::coordinate(0), h, Vec::Zero(1), 1, {true, true});
    for (std::uint32_t l1 = 0; l1 <= 3; ++l1) {
      for (std::uint32_t l2 = 0; l2 <= 3; ++l2) {
        if (l1 == 0 && l2 == 0) continue;
        // With alpha > 0 only the subsampling difference collapses exactly.
        if (alpha != 0.0 && l1 == 0) continue;
        for (double v : sample_paths(sampler, {l1, l2}, 0, 10000, 1)) worst = std::max(worst, std::abs(v));
        ++checked;
      }
    }
  }
  return {worst <= 1e-12, fmt("max |dPhi| = %.3g over %zu level/alpha pairs x 1e4 paths", worst, checked)};
}

Outcome criterion2() {
  SyntheticSpec gs;
  gs.kind = SyntheticKind::kOu;
  gs.m = 16;
  gs.d = 1;
  gs.seed = 20240;
  const Dataset all = gen_synthetic(gs);
  double worst = 0;
  std::string where;
  for (std::size_t m : {std::size_t{1}, std::size_t{16}}) {
    const auto data = testing::matrix_data(all.rows.topRows(static_cast<Eigen::Index>(m)));
    const OuModel model(data, 1.0);
    OuSpec spec;
    spec.alpha = 1.0;
    spec.h = 0.1;
    spec.m = m;
    for (std::size_t i = 0; i < m; ++i) spec.data.push_back(data->rows(static_cast<Eigen::Index>(i), 0));
    const double beta = 1.0 / std::sqrt(static_cast<double>(m));
    for (std::uint64_t k : {1u, 5u, 20u}) {
      // Exact drift: the full batch every step.
      const ChainSpec exact{m, 0.1, k, beta, ReplacementMode::kWithout};
      testing::Moments e;
      for (std::uint64_t p = 0; p < 100000; ++p) {
        e.add(simulate_chain(model, exact, PathKey{11, 0, 0, p}, Vec::Zero(1)).final_state.position[0]);
      }
      const double rel_e = std::abs(e.variance / ou_variance_exact(spec, k) - 1);
      if (rel_e > worst) {
        worst = rel_e;
        where = fmt("exact m=%zu k=%llu", m, static_cast<unsigned long long>(k));
      }
      for (std::size_t s : {std::size_t{1}, std::size_t{4}}) {
        spec.s = s;
        spec.mode = ReplacementMode::kWith;
        const ChainSpec sub{s, 0.1, k, beta, ReplacementMode::kWith};
        testing::Moments b;
        for (std::uint64_t p = 0; p < 100000; ++p) {
          b.add(simulate_chain(model, sub, PathKey{12, 0, 0, p}, Vec::Zero(1)).final_state.position[0]);
        }
        const double rel = std::abs(b.variance / ou_variance_subsampled_exact(spec, k) - 1);
        if (rel > worst) {
          worst = rel;
          where = fmt("subsampled m=%zu s=%zu k=%llu", m, s, static_cast<unsigned long long>(k));
        }
      }
    }
  }
  return {worst <= 0.05, fmt("max relative error %.4f (%s)", worst, where.c_str())};
}

Outcome criterion3() {
  NoiseSource noise(3, {});
  double worst_literal = 0;
  double worst_exact = 0;
  for (std::size_t m = 1; m <= 8; ++m) {
    std::vector<double> data(m);
    for (double& x : data) x = 2 * noise.gaussian() + 1;
    double mean = 0;
    double sq = 0;
    for (double x : data) {
      mean += x / static_cast<double>(m);
      sq += x * x / static_cast<double>(m);
    }
    for (std::size_t s = 1; s <= m; ++s) {
      for (auto mode : {ReplacementMode::kWith, ReplacementMode::kWithout}) {
        const double e = enumerate_subsample_mean(data, s, mode).variance;
        const double base = (sq - mean * mean) / static_cast<double>(s);
        const bool with = mode == ReplacementMode::kWith;
        const double literal = base * (with ? 1.0 : 1.0 - static_cast<double>(s) / static_cast<double>(m));
        const double exact =
            base * (with || m == 1 ? 1.0 : static_cast<double>(m - s) / static_cast<double>(m - 1));
        worst_literal = std::max(worst_literal, std::abs(e - literal));
        worst_exact = std::max(worst_exact, std::abs(e - exact));
      }
    }
  }
  std::ostringstream oracle;
  const bool decay_ok = [&] {
    const auto data = testing::logistic_data(8, 2, 5);
    const LogisticModel model(data, PriorKind::kGaussian);
    double worst = 0;
    for (auto mode : {ReplacementMode::kWith, ReplacementMode::kWithout}) {
      const double m1 = subsample_fourth_moment_enumerated(model, Vec::Constant(2, 0.4), 1, mode);
      const double m2 = subsample_fourth_moment_enumerated(model, Vec::Constant(2, 0.4), 2, mode);
      worst = std::max(worst, m2 / m1);
    }
    oracle << fmt("fourth-moment ratio s=2/s=1 %.3f", worst);
    return worst <= 0.6;
  }();
  const bool pass = worst_literal <= 1e-12 && decay_ok;
  return {pass, fmt("max |enum - (1/s)var*(1 or 1-s/m)| = %.3g; with (m-s)/(m-1) = %.3g; %s",
                    worst_literal, worst_exact, oracle.str().c_str())};
}

Outcome criterion4(const DeskLogistic& desk) {
  const ClusterSampler sampler(desk.model, TestFunction::norm_sq(), desk.hierarchy, desk.x0, 4, {true, true});
  std::vector<LevelStats> stats;
  for (const auto& l : level_set(4, {true, true})) {
    LevelStats s;
    s.level = l;
    top_up(sampler, s, 1000, 1);
    stats.push_back(s);
  }
  const FittedRates r = fit_rates(stats);
  const bool beta_ok = r.beta[0] >= 1.5 && r.beta[0] <= 2.5 && r.beta[1] >= 1.5 && r.beta[1] <= 2.5;
  const bool alpha_ok = r.alpha[0] >= 0.7 && r.alpha[0] <= 1.4 && r.alpha[1] >= 0.7 && r.alpha[1] <= 1.4;
  const bool gamma_ok = r.gamma[0] == 1.0 && r.gamma[1] == 1.0;
  return {beta_ok && alpha_ok && gamma_ok,
          fmt("alpha_hat = (%.3f, %.3f), beta_hat = (%.3f, %.3f), gamma = (%g, %g)", r.alpha[0],
              r.alpha[1], r.beta[0], r.beta[1], r.gamma[0], r.gamma[1])};
}

Outcome criterion5() {
  const std::vector<double> eps{0.2, 0.1, 0.05, 0.025};
  ExperimentConfig c = desk_config();
  c.epsilons = eps;
  const ExperimentResult masga = run_experiment(c, scratch("c5_masga").string());
  std::vector<double> log_inv_eps;
  std::vector<double> log_cost;
  std::vector<double> log_mc_cost;
  double lo = INFINITY;
  double hi = 0;
  std::string levels;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    const auto& row = masga.convergence[i];
    const double scaled = row.total_cost * row.eps * row.eps;
    lo = std::min(lo, scaled);
    hi = std::max(hi, scaled);
    log_inv_eps.push_back(std::log(1 / row.eps));
    log_cost.push_back(std::log(row.total_cost));
    // Standard MC at the finest level MASGA used for this epsilon.
    ExperimentConfig mc = desk_config();
    mc.estimator = "mc";
    mc.mc_level = row.L;
    mc.epsilons = {row.eps};
    const ExperimentResult r = run_experiment(mc, scratch("c5_mc").string());
    log_mc_cost.push_back(std::log(r.final_report.total_cost));
    levels += fmt("%s%u", i ? "," : "", row.L);
  }
  const double s_masga = slope(log_inv_eps, log_cost);
  const double s_mc = slope(log_inv_eps, log_mc_cost);
  const bool pass = hi / lo <= 3 && s_masga >= 1.7 && s_masga <= 2.4 && s_mc >= 2.6;
  return {pass, fmt("MASGA cost*eps^2 max/min = %.2f, slope %.2f; MC slope %.2f; L = %s", hi / lo,
                    s_masga, s_mc, levels.c_str())};
}

Outcome criterion6(const DeskLogistic& desk) {
  const TestFunction f = TestFunction::norm_sq();
  const ClusterSampler sampler(desk.model, f, desk.hierarchy, desk.x0, 6, {true, true});
  double sum = 0;
  double var = 0;
  for (const auto& l : level_set(3, {true, true})) {
    LevelStats s;
    s.level = l;
    top_up(sampler, s, l == MultiIndex{0, 0} ? 100000 : 2000, 1);
    sum += s.mean;
    var += s.variance() / static_cast<double>(s.n);
  }
  const SingleChainSampler single(desk.model, f, desk.hierarchy, desk.x0, 66);
  LevelStats direct;
  direct.level = {3, 3};
  top_up(single, direct, 100000, 1);
  const double se = std::sqrt(var + direct.variance() / static_cast<double>(direct.n));
  const double diff = std::abs(sum - direct.mean);
  return {diff <= 3 * se,
          fmt("telescoped %.6f, direct %.6f, |diff| = %.2g, 3 SE = %.2g", sum, direct.mean, diff, 3 * se)};
}

Outcome criterion7() {
  const auto hand = optimal_paths({4, 1}, {1, 4}, 1.0);
  bool ok = hand == std::vector<std::uint64_t>{8, 2};
  std::string detail = fmt("V=[4,1], C=[1,4], eps=1 -> [%llu,%llu]",
                           static_cast<unsigned long long>(hand[0]), static_cast<unsigned long long>(hand[1]));
  const std::vector<std::vector<double>> vs{{4, 1, 0.25}, {1, 1, 1}, {0.3, 2, 0.01}};
  const std::vector<std::vector<double>> cs{{1, 2, 4}, {1, 5, 9}, {3, 1, 2}};
  const double eps = 0.2;
  double worst_gap = 0;
  for (std::size_t t = 0; t < vs.size(); ++t) {
    const auto n = optimal_paths(vs[t], cs[t], eps);
    double cost = 0;
    double v = 0;
    for (std::size_t i = 0; i < 3; ++i) {
      cost += static_cast<double>(n[i]) * cs[t][i];
      v += vs[t][i] / static_cast<double>(n[i]);
    }
    ok = ok && v <= eps * eps * (1 + 1e-12);
    // Cheapest feasible integer allocation on a grid around the optimum.
    double best = INFINITY;
    const auto raw = optimal_paths_raw(vs[t], cs[t], eps);
    const auto range = [](double x) { return std::pair<std::uint64_t, std::uint64_t>(1, static_cast<std::uint64_t>(3 * x) + 3); };
    for (std::uint64_t a = range(raw[0]).first; a <= range(raw[0]).second; ++a) {
      for (std::uint64_t b = range(raw[1]).first; b <= range(raw[1]).second; ++b) {
        const double rest = eps * eps - vs[t][0] / static_cast<double>(a) - vs[t][1] / static_cast<double>(b);
        if (rest <= 0) continue;
        const auto c3 = static_cast<std::uint64_t>(std::ceil(vs[t][2] / rest - 1e-9));
        best = std::min(best, static_cast<double>(a) * cs[t][0] + static_cast<double>(b) * cs[t][1] +
                                  static_cast<double>(std::max<std::uint64_t>(c3, 1)) * cs[t][2]);
      }
    }
    // Rounding up can cost at most one path per level over the integer optimum.
    const double slack = cs[t][0] + cs[t][1] + cs[t][2];
    ok = ok && cost <= best + slack;
    worst_gap = std::max(worst_gap, (cost - best) / slack);
  }
  return {ok, detail + fmt("; grid search: worst (cost - best) / sum C = %.3f", worst_gap)};
}

Outcome criterion8() {
  ExperimentConfig c = desk_config();
  c.epsilons = {0.1};
  const fs::path a = scratch("c8_a");
  const fs::path b = scratch("c8_b");
  const fs::path d = scratch("c8_c");
  run_experiment(c, a.string());
  c.threads = 4;
  run_experiment(c, b.string());
  c.threads = 3;
  run_experiment(c, d.string());
  bool same = true;
  for (const char* f : {"levels.csv", "report.json"}) {
    same = same && slurp(a / f) == slurp(b / f) && slurp(a / f) == slurp(d / f) && !slurp(a / f).empty();
  }
  return {same, "levels.csv and report.json identical at 1, 4 and 3 threads"};
}

Outcome criterion9(const DeskLogistic& desk) {
  // Step-identity with s = m.
  const ControlVariateDrift cv(desk.model, desk.x0);
  double worst = 0;
  for (std::uint64_t k = 1; k <= 30; ++k) {
    const ChainSpec spec{1000, 0.005, k, desk.hierarchy.beta, ReplacementMode::kWithout};
    for (std::uint64_t p = 0; p < 3; ++p) {
      const PathKey key{9, 0, 0, p};
      const Vec a = simulate_cv_chain(cv, desk.model, spec, key, Vec::Zero(5)).final_state.position;
      const Vec b = simulate_chain(desk.model, spec, key, Vec::Zero(5)).final_state.position;
      worst = std::max(worst, (a - b).norm() / std::max(1.0, b.norm()));
    }
  }
  ExperimentConfig c = desk_config();
  c.f = "coordinate(0)";
  c.epsilons = {0.005};
  const ExperimentResult m = run_experiment(c, scratch("c9_masga").string());
  c.estimator = "sgld_cv";
  const ExperimentResult s = run_experiment(c, scratch("c9_cv").string());
  const double se = std::hypot(m.final_report.std_error, s.final_report.std_error);
  const double diff = std::abs(m.final_report.estimate - s.final_report.estimate);
  return {worst <= 1e-12 && diff <= 3 * se,
          fmt("s=m max step deviation %.2g; MASGA %.6f vs SGLD-CV %.6f, |diff| = %.2g, 3 SE = %.2g", worst,
              m.final_report.estimate, s.final_report.estimate, diff, 3 * se)};
}

}  // namespace

int main() {
  const DeskLogistic desk;
  struct Criterion {
    std::string name;
    double time_limit;  // seconds, 0 for none
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"1 exact antithetic collapse (OU)", 30, criterion1},
      {"2 OU variance oracle", 120, criterion2},
      {"3 subsampling moment oracles", 60, criterion3},
      {"4 variance and weak rates", 600, [&] { return criterion4(desk); }},
      {"5 complexity flatness", 1200, criterion5},
      {"6 telescoping consistency", 300, [&] { return criterion6(desk); }},
      {"7 allocation formula", 0, criterion7},
      {"8 determinism", 0, criterion8},
      {"9 SGLD-CV baseline", 0, [&] { return criterion9(desk); }},
  };
  int failures = 0;
  for (const auto& [name, limit, run] : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (limit > 0 && secs > limit) {
      o.pass = false;
      o.detail += fmt("; exceeded the %.0f s limit", limit);
    }
    std::printf("%s criterion %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
