#pragma once

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "masga/models.hpp"
#include "masga/sde.hpp"

namespace masga {

/// (ell1, ell2): ell1 indexes the subsample size s0 * 2^ell1, ell2 the step
/// size h0 * 2^-ell2.
struct MultiIndex {
  std::uint32_t ell1 = 0;
  std::uint32_t ell2 = 0;

  auto operator<=>(const MultiIndex&) const = default;
};

std::ostream& operator<<(std::ostream& os, const MultiIndex& idx);

/// Level parameters. Terminal time t = n0 * h0 is the same on every level:
/// level ell2 takes n0 * 2^ell2 steps of h0 * 2^-ell2.
struct LevelHierarchy {
  std::size_t s0 = 4;
  double h0 = 0.005;
  std::uint64_t n0 = 100;
  double beta = 0.0;
  ReplacementMode mode = ReplacementMode::kWithout;

  std::size_t s(std::uint32_t ell1) const { return s0 << ell1; }
  double h(std::uint32_t ell2) const { return h0 / static_cast<double>(1ULL << ell2); }
  std::uint64_t steps(std::uint32_t ell2) const { return n0 << ell2; }
  double terminal_time() const { return static_cast<double>(n0) * h0; }
};

class TestFunction {
 public:
  enum class Kind { kNormSq, kNorm, kCoordinate, kLogNorm, kExpCoordinate };

  static TestFunction norm_sq() { return TestFunction(Kind::kNormSq, 0); }
  static TestFunction norm() { return TestFunction(Kind::kNorm, 0); }
  static TestFunction coordinate(std::size_t i) { return TestFunction(Kind::kCoordinate, i); }
  static TestFunction log_norm() { return TestFunction(Kind::kLogNorm, 0); }
  static TestFunction exp_coordinate(std::size_t i) {
    return TestFunction(Kind::kExpCoordinate, i);
  }
  /// Parses norm_sq | norm | coordinate(i) | log_norm | exp_coordinate(i).
  static TestFunction parse(const std::string& tag);

  double operator()(const Vec& x) const;
  std::string tag() const;
  Kind kind() const { return kind_; }

 private:
  TestFunction(Kind kind, std::size_t index) : kind_(kind), index_(index) {}
  Kind kind_;
  std::size_t index_;
};

/// Streaming mean and variance (Welford) for one level.
struct LevelStats {
  MultiIndex level;
  std::uint64_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;
  double cost_per_path = 0.0;

  void update(double sample);
  /// Parallel-merge (Chan et al.).
  void merge(const LevelStats& other);
  /// m2 / (n - 1); throws std::domain_error for n < 2.
  double variance() const;
  double std_error() const;
  double total_cost() const { return static_cast<double>(n) * cost_per_path; }
};

LevelStats update_stats(LevelStats stats, double sample);

/// Sum of weight * f(X) over the active chains: the nested antithetic
/// difference for an antithetic cluster, the plain mixed difference for a
/// plain one.
double delta_ant_phi(const TestFunction& f, const ChainCluster& cluster);
double delta_phi_plain(const TestFunction& f, const ChainCluster& cluster);

/// (f(s_l1, h_l2) - f(s_l1, h_l2-1)) - (f(s_l1-1, h_l2) - f(s_l1-1, h_l2-1)).
double plain_difference(double fine_fine, double fine_coarse, double coarse_fine,
                        double coarse_coarse);

/// Which indices of the level hierarchy a sampler refines.
struct ActiveIndices {
  bool subsampling = true;
  bool time = true;
};

/// Produces independent samples of a level correction. Sample j of level l
/// depends only on (seed, l, j), so drawing more samples is append-only.
class LevelSampler {
 public:
  virtual ~LevelSampler() = default;
  virtual double sample(MultiIndex level, std::uint64_t path) const = 0;
  virtual double cost_per_path(MultiIndex level) const = 0;
  virtual ActiveIndices active() const = 0;
  /// Throws LevelCapError when the level cannot be simulated.
  virtual void check_admissible(MultiIndex level) const = 0;
};

/// Level corrections from coupled clusters: the MASGA nested antithetic
/// difference (both indices), antithetic MLMC in one index, or the plain
/// (non-antithetic) counterparts.
class ClusterSampler final : public LevelSampler {
 public:
  ClusterSampler(const DriftModel& model, TestFunction f, LevelHierarchy hierarchy, Vec x0,
                 std::uint64_t master_seed, ActiveIndices active,
                 Coupling coupling = Coupling::kAntithetic);

  double sample(MultiIndex level, std::uint64_t path) const override;
  double cost_per_path(MultiIndex level) const override;
  ActiveIndices active() const override { return active_; }
  void check_admissible(MultiIndex level) const override;

  ClusterGeometry geometry(MultiIndex level) const;
  ChainCluster cluster(MultiIndex level, std::uint64_t path) const;
  const LevelHierarchy& hierarchy() const { return hierarchy_; }

 private:
  const DriftModel& model_;
  TestFunction f_;
  LevelHierarchy hierarchy_;
  Vec x0_;
  std::uint64_t seed_;
  ActiveIndices active_;
  Coupling coupling_;
};

/// f(X) of a single chain at (s_ell1, h_ell2): the standard Monte Carlo
/// sample, and the direct reference for telescoping checks.
class SingleChainSampler final : public LevelSampler {
 public:
  SingleChainSampler(const DriftModel& model, TestFunction f, LevelHierarchy hierarchy, Vec x0,
                     std::uint64_t master_seed);

  double sample(MultiIndex level, std::uint64_t path) const override;
  double cost_per_path(MultiIndex level) const override;
  ActiveIndices active() const override { return {true, true}; }
  void check_admissible(MultiIndex level) const override;

 private:
  const DriftModel& model_;
  TestFunction f_;
  LevelHierarchy hierarchy_;
  Vec x0_;
  std::uint64_t seed_;
};

/// Samples paths [first, first + count) of a level, using up to `threads`
/// worker threads. The result is independent of the thread count.
std::vector<double> sample_paths(const LevelSampler& sampler, MultiIndex level,
                                 std::uint64_t first, std::uint64_t count, unsigned threads = 0);

/// Extends stats with paths [stats.n, target).
void top_up(const LevelSampler& sampler, LevelStats& stats, std::uint64_t target,
            unsigned threads = 0);

// Single-sample helpers mirroring the estimator families.

/// f(X^f) - (f(X^{c-}) + f(X^{c+})) / 2 in the subsampling index at fixed h;
/// f(X^{s0,h}) when ell1 = 0.
double amlmc_subsampling_sample(const TestFunction& f, const DriftModel& model, std::uint32_t ell1,
                                std::size_t s0, double h, std::uint64_t n_steps, double beta,
                                const PathKey& key, const Vec& x0,
                                ReplacementMode mode = ReplacementMode::kWithout);

/// Antithetic difference in the time index at fixed batch size s; the
/// hierarchy supplies h0 and n0.
double amlmc_discretisation_sample(const TestFunction& f, const DriftModel& model,
                                   std::uint32_t ell2, std::size_t s,
                                   const LevelHierarchy& hierarchy, const PathKey& key,
                                   const Vec& x0);

struct McResult {
  double estimate = 0.0;
  double std_error = 0.0;
  double variance = 0.0;
  std::uint64_t n = 0;
  double cost = 0.0;  // per-datum kernel evaluations
};

/// Average of f over N independent chains; cost = N * n_steps * s.
McResult standard_mc_estimate(const TestFunction& f, const DriftModel& model, const ChainSpec& spec,
                              const Vec& x0, std::uint64_t master_seed, std::uint64_t n_paths,
                              unsigned threads = 0);

/// Plain Monte Carlo over N chains driven by the control-variate drift
/// anchored at x_hat. Each step evaluates the kernel on the batch at both
/// X_k and x_hat, so cost = N * n_steps * 2s.
McResult sgld_cv_estimate(const TestFunction& f, const DriftModel& model, const ChainSpec& spec,
                          const Vec& x_hat, const Vec& x0, std::uint64_t master_seed,
                          std::uint64_t n_paths, unsigned threads = 0);

/// Writes `ell1,ell2,n,mean,var,cost_per_path`.
void write_levels_csv(std::ostream& os, const std::vector<LevelStats>& stats);
std::vector<LevelStats> read_levels_csv(std::istream& is);

}  // namespace masga
