#include "masga/adaptive.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "masga/errors.hpp"

namespace masga {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool fits_active(const MultiIndex& l, ActiveIndices active) {
  return (active.subsampling || l.ell1 == 0) && (active.time || l.ell2 == 0);
}

const LevelStats* find_level(const std::vector<LevelStats>& stats, MultiIndex level) {
  for (const auto& s : stats) {
    if (s.level == level) return &s;
  }
  return nullptr;
}

// Slopes of y against the active coordinates of the levels, by least squares
// with an intercept.
std::array<double, 2> plane_slopes(const std::vector<MultiIndex>& levels,
                                   const std::vector<double>& y, ActiveIndices active,
                                   const char* what) {
  std::vector<int> axes;
  if (active.subsampling) axes.push_back(0);
  if (active.time) axes.push_back(1);
  const auto cols = static_cast<Eigen::Index>(axes.size() + 1);
  const auto rows = static_cast<Eigen::Index>(levels.size());
  if (axes.empty()) throw FitError("no active index to fit");
  if (rows < cols) {
    throw FitError(std::string("too few levels to fit the ") + what + " rate");
  }
  Eigen::MatrixXd X(rows, cols);
  Eigen::VectorXd rhs(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    X(r, 0) = 1.0;
    for (std::size_t a = 0; a < axes.size(); ++a) {
      const auto& l = levels[static_cast<std::size_t>(r)];
      X(r, static_cast<Eigen::Index>(a + 1)) = axes[a] == 0 ? l.ell1 : l.ell2;
    }
    rhs[r] = y[static_cast<std::size_t>(r)];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < cols) {
    throw FitError(std::string("degenerate regressors in the ") + what + " fit");
  }
  const Eigen::VectorXd coef = qr.solve(rhs);
  std::array<double, 2> out{kNaN, kNaN};
  for (std::size_t a = 0; a < axes.size(); ++a) {
    out[static_cast<std::size_t>(axes[a])] = -coef[static_cast<Eigen::Index>(a + 1)];
  }
  return out;
}

}  // namespace

void AdaptiveConfig::validate() const {
  if (!(epsilon > 0)) throw ConfigError("epsilon must be positive");
  if (n_pilot < 2) throw ConfigError("n_pilot must be at least 2");
  if (L_init > L_max) throw ConfigError("L_init exceeds L_max");
  if (!(alpha_assumed > 0)) throw ConfigError("alpha_assumed must be positive");
}

std::vector<double> optimal_paths_raw(const std::vector<double>& variances,
                                      const std::vector<double>& costs, double epsilon) {
  if (variances.size() != costs.size()) {
    throw AllocationError("variance and cost lists differ in length");
  }
  if (!(epsilon > 0)) throw AllocationError("epsilon must be positive");
  double total = 0.0;
  for (std::size_t i = 0; i < variances.size(); ++i) {
    if (std::isnan(variances[i]) || variances[i] < 0) {
      throw AllocationError("level " + std::to_string(i) + " has an invalid variance");
    }
    if (!(costs[i] > 0)) throw AllocationError("level " + std::to_string(i) + " has no cost");
    total += std::sqrt(variances[i] * costs[i]);
  }
  std::vector<double> out(variances.size());
  const double scale = total / (epsilon * epsilon);
  for (std::size_t i = 0; i < variances.size(); ++i) {
    out[i] = std::sqrt(variances[i] / costs[i]) * scale;
  }
  return out;
}

std::vector<std::uint64_t> optimal_paths(const std::vector<double>& variances,
                                         const std::vector<double>& costs, double epsilon,
                                         std::uint64_t n_pilot) {
  std::vector<std::uint64_t> out;
  out.reserve(variances.size());
  for (double n : optimal_paths_raw(variances, costs, epsilon)) {
    if (n > 1e18) throw AllocationError("allocation overflows");
    out.push_back(std::max<std::uint64_t>(static_cast<std::uint64_t>(std::ceil(n)), n_pilot));
  }
  return out;
}

std::vector<std::uint64_t> optimal_paths(const std::vector<LevelStats>& stats, double epsilon,
                                         std::uint64_t n_pilot) {
  std::vector<double> v;
  std::vector<double> c;
  for (const auto& s : stats) {
    v.push_back(s.n >= 2 ? s.variance() : kNaN);
    c.push_back(s.cost_per_path);
  }
  return optimal_paths(v, c, epsilon, n_pilot);
}

std::vector<MultiIndex> level_set(std::uint32_t L, ActiveIndices active) {
  std::vector<MultiIndex> out;
  const std::uint32_t L1 = active.subsampling ? L : 0;
  const std::uint32_t L2 = active.time ? L : 0;
  for (std::uint32_t i = 0; i <= L1; ++i) {
    for (std::uint32_t j = 0; j <= L2; ++j) out.push_back({i, j});
  }
  return out;
}

std::vector<MultiIndex> boundary_levels(std::uint32_t L, ActiveIndices active) {
  std::vector<MultiIndex> out;
  for (const auto& l : level_set(L, active)) {
    if ((active.subsampling && l.ell1 == L) || (active.time && l.ell2 == L)) out.push_back(l);
  }
  return out;
}

double estimate_bias(const std::vector<LevelStats>& stats, std::uint32_t L, ActiveIndices active,
                     const std::array<double, 2>& alpha, double alpha_assumed) {
  const auto rate = [&](std::size_t k) {
    const double a = alpha[k];
    return (std::isnan(a) || a <= 0.1) ? alpha_assumed : a;
  };
  double bias = 0.0;
  for (const auto& l : boundary_levels(L, active)) {
    const LevelStats* s = find_level(stats, l);
    if (s == nullptr) throw std::invalid_argument("boundary level missing from stats");
    double a = std::numeric_limits<double>::infinity();
    if (active.subsampling && l.ell1 == L) a = std::min(a, rate(0));
    if (active.time && l.ell2 == L) a = std::min(a, rate(1));
    bias = std::max(bias, std::abs(s->mean) / (std::exp2(a) - 1.0));
  }
  return bias;
}

FittedRates fit_rates(const std::vector<LevelStats>& stats, ActiveIndices active) {
  std::vector<MultiIndex> mean_levels;
  std::vector<double> log_mean;
  std::vector<MultiIndex> var_levels;
  std::vector<double> log_var;
  for (const auto& s : stats) {
    if (!fits_active(s.level, active)) continue;
    if ((active.subsampling && s.level.ell1 == 0) || (active.time && s.level.ell2 == 0)) continue;
    if (s.mean != 0.0 && std::isfinite(s.mean)) {
      mean_levels.push_back(s.level);
      log_mean.push_back(std::log2(std::abs(s.mean)));
    }
    if (s.n >= 2) {
      const double v = s.variance();
      if (v > 0 && std::isfinite(v)) {
        var_levels.push_back(s.level);
        log_var.push_back(std::log2(v));
      }
    }
  }
  FittedRates r;
  r.alpha = plane_slopes(mean_levels, log_mean, active, "weak");
  r.beta = plane_slopes(var_levels, log_var, active, "variance");
  r.gamma = {active.subsampling ? 1.0 : 0.0, active.time ? 1.0 : 0.0};
  return r;
}

bool check_complexity_condition(const std::vector<double>& alpha, const std::vector<double>& beta,
                                const std::vector<double>& gamma) {
  if (alpha.size() != beta.size() || alpha.size() != gamma.size() || alpha.empty()) {
    throw std::invalid_argument("rate vectors must be nonempty and of equal length");
  }
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < alpha.size(); ++k) {
    if (!(alpha[k] > 0)) throw std::invalid_argument("alpha components must be positive");
    worst = std::max(worst, (gamma[k] - beta[k]) / alpha[k]);
  }
  return worst < 0;
}

EstimatorReport run_adaptive(const LevelSampler& sampler, const AdaptiveConfig& config) {
  config.validate();
  const ActiveIndices active = sampler.active();
  std::vector<LevelStats> stats;

  const auto add_level = [&](MultiIndex level) {
    sampler.check_admissible(level);
    LevelStats s;
    s.level = level;
    top_up(sampler, s, config.n_pilot, config.threads);
    stats.push_back(s);
  };

  std::uint32_t L = config.L_init;
  for (const auto& l : level_set(L, active)) add_level(l);

  EstimatorReport report;
  while (true) {
    const auto target = optimal_paths(stats, config.epsilon, config.n_pilot);
    for (std::size_t i = 0; i < stats.size(); ++i) top_up(sampler, stats[i], target[i], config.threads);

    std::array<double, 2> alpha{kNaN, kNaN};
    try {
      report.rates = fit_rates(stats, active);
      alpha = report.rates.alpha;
    } catch (const FitError&) {
      report.rates.alpha = {kNaN, kNaN};
      report.rates.beta = {kNaN, kNaN};
      report.rates.gamma = {active.subsampling ? 1.0 : 0.0, active.time ? 1.0 : 0.0};
    }
    report.bias_estimate = estimate_bias(stats, L, active, alpha, config.alpha_assumed);
    if (report.bias_estimate < config.epsilon / 2) {
      report.converged = true;
      break;
    }
    if (L >= config.L_max || (!active.subsampling && !active.time)) {
      report.converged = false;
      break;
    }
    ++L;
    for (const auto& l : boundary_levels(L, active)) add_level(l);
  }

  report.levels_used = L;
  double var_of_estimate = 0.0;
  for (const auto& s : stats) {
    report.estimate += s.mean;
    report.total_cost += s.total_cost();
    report.allocations[s.level] = s.n;
    if (s.n >= 2) var_of_estimate += s.variance() / static_cast<double>(s.n);
  }
  report.std_error = std::sqrt(var_of_estimate);
  std::sort(stats.begin(), stats.end(),
            [](const LevelStats& a, const LevelStats& b) { return a.level < b.level; });
  report.stats = std::move(stats);
  return report;
}

EstimatorReport run_masga(const DriftModel& model, const TestFunction& f,
                          const LevelHierarchy& hierarchy, const Vec& x0, std::uint64_t master_seed,
                          const AdaptiveConfig& config) {
  const ClusterSampler sampler(model, f, hierarchy, x0, master_seed, {true, true});
  return run_adaptive(sampler, config);
}

}  // namespace masga
