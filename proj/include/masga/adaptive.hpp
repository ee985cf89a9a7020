#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <vector>

#include "masga/estimators.hpp"

namespace masga {

struct AdaptiveConfig {
  double epsilon = 0.1;
  std::uint64_t n_pilot = 100;
  std::uint32_t L_init = 2;
  std::uint32_t L_max = 8;
  /// Weak rate used for bias extrapolation when the fitted one is unusable.
  double alpha_assumed = 1.0;
  unsigned threads = 0;

  /// Throws ConfigError unless epsilon > 0, n_pilot >= 2 and L_init <= L_max.
  void validate() const;
};

/// Per-index rates: |E dPhi| ~ 2^-<alpha,l>, Var dPhi ~ 2^-<beta,l>,
/// cost ~ 2^<gamma,l>. Entries of inactive indices are NaN (gamma 0).
struct FittedRates {
  std::array<double, 2> alpha{};
  std::array<double, 2> beta{};
  std::array<double, 2> gamma{};
};

struct EstimatorReport {
  double estimate = 0.0;
  double std_error = 0.0;
  std::map<MultiIndex, std::uint64_t> allocations;
  double total_cost = 0.0;
  double bias_estimate = 0.0;
  FittedRates rates;
  bool converged = false;
  std::uint32_t levels_used = 0;
  std::vector<LevelStats> stats;
};

/// eps^-2 sqrt(V_l / C_l) sum_l' sqrt(V_l' C_l'), before rounding.
std::vector<double> optimal_paths_raw(const std::vector<double>& variances,
                                      const std::vector<double>& costs, double epsilon);

/// Ceiling of optimal_paths_raw, floored at n_pilot. Throws AllocationError
/// on a NaN or negative variance or a nonpositive cost.
std::vector<std::uint64_t> optimal_paths(const std::vector<double>& variances,
                                         const std::vector<double>& costs, double epsilon,
                                         std::uint64_t n_pilot = 0);
std::vector<std::uint64_t> optimal_paths(const std::vector<LevelStats>& stats, double epsilon,
                                         std::uint64_t n_pilot = 0);

/// Levels of the square [0, L]^2 restricted to the active indices.
std::vector<MultiIndex> level_set(std::uint32_t L, ActiveIndices active);
/// Levels of level_set(L) with an active index equal to L.
std::vector<MultiIndex> boundary_levels(std::uint32_t L, ActiveIndices active);

/// max over boundary levels l of |mean_l| / (2^alpha_k - 1), where k is the
/// index at its maximum L on that boundary (the smaller rate at the corner).
/// alpha_k <= 0.1 or NaN is replaced by alpha_assumed.
double estimate_bias(const std::vector<LevelStats>& stats, std::uint32_t L, ActiveIndices active,
                     const std::array<double, 2>& alpha, double alpha_assumed = 1.0);

/// Least squares of log2 |mean| and log2 variance against the level over
/// the levels where every active index is at least 1 (levels with zero
/// mean or variance are skipped). gamma is 1 per active index. Throws
/// FitError when the regressors are degenerate.
FittedRates fit_rates(const std::vector<LevelStats>& stats, ActiveIndices active = {});

/// max_k (gamma_k - beta_k) / alpha_k < 0 over the given indices.
bool check_complexity_condition(const std::vector<double>& alpha, const std::vector<double>& beta,
                                const std::vector<double>& gamma);

/// Algorithm 1 over the square level set: pilot, allocate, top up,
/// estimate the bias, grow L until bias < eps / 2 or L_max.
EstimatorReport run_adaptive(const LevelSampler& sampler, const AdaptiveConfig& config);

EstimatorReport run_masga(const DriftModel& model, const TestFunction& f,
                          const LevelHierarchy& hierarchy, const Vec& x0, std::uint64_t master_seed,
                          const AdaptiveConfig& config);

}  // namespace masga
