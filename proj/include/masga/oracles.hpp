#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "masga/dataset.hpp"
#include "masga/models.hpp"

namespace masga {

/// Scalar OU chain X_{k+1} = X_k - alpha h X_k + h mean(xi_U) + sqrt(h/m) Z.
struct OuSpec {
  double alpha = 1.0;
  double h = 0.1;
  std::size_t m = 1;
  std::vector<double> data;
  double v0 = 0.0;
  std::size_t s = 1;
  ReplacementMode mode = ReplacementMode::kWith;
};

/// Var X_k with the exact drift: (1 - alpha h)^{2k} v0 + (h/m) sum_{j=1}^k (1 - alpha h)^{2(k-j)}.
double ou_variance_exact(const OuSpec& spec, std::uint64_t k);
/// Var of the subsampled chain: ou_variance_exact plus
/// h^2 subsample_variance_exact(data, s, mode) sum_{j=1}^k (1 - alpha h)^{2(k-j)}.
double ou_variance_subsampled_exact(const OuSpec& spec, std::uint64_t k);
/// E X_k from a deterministic start x0 (either chain).
double ou_mean_exact(const OuSpec& spec, std::uint64_t k, double x0);

/// Variance of the mean of a batch of size s drawn from `data`:
/// (1/s) (mean(xi^2) - mean(xi)^2), times (m - s)/(m - 1) without replacement.
double subsample_variance_exact(const std::vector<double>& data, std::size_t s,
                                ReplacementMode mode);

struct SubsampleMoments {
  double mean = 0.0;
  double variance = 0.0;
  double fourth_central = 0.0;
  std::uint64_t batches = 0;  // distinct batches enumerated
};

/// Exact law of the batch mean by enumerating every batch: multisets with
/// multinomial weights with replacement, subsets without. Requires m <= 8.
SubsampleMoments enumerate_subsample_mean(const std::vector<double>& data, std::size_t s,
                                          ReplacementMode mode);

/// E |b(x, U) - a(x)|^4 by enumerating every batch of the model's dataset.
/// Throws ComplexityError for m > 8 and RangeError for s > m or s = 0.
double subsample_fourth_moment_enumerated(const DriftModel& model, const Vec& x, std::size_t s,
                                          ReplacementMode mode);

/// Runs the closed-form and enumeration checks (and a short OU Monte Carlo
/// comparison), printing one line per check. Returns true if all pass.
bool run_oracle_checks(std::ostream& os, std::uint64_t n_paths = 20000);

}  // namespace masga
