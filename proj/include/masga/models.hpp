#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "masga/dataset.hpp"

namespace masga {

using Vec = Eigen::VectorXd;

/// Gradient of log N(0, I) at x.
Vec gaussian_prior_grad(const Vec& x);
/// Gradient of log(1/2 N(0, I) + 1/2 N(1, I)) at x: -x + w(x) 1, with w the
/// responsibility of the component centred at the all-ones vector.
Vec mixture_prior_grad(const Vec& x);
double gaussian_prior_log_density(const Vec& x);
double mixture_prior_log_density(const Vec& x);

/// A drift a(x) = c(x) + (1/m) sum_i k(x, xi_i) and its subsampled estimator
/// b(x, U) = c(x) + (1/|U|) sum_{i in U} k(x, xi_i), where c is the
/// batch-independent part. The step applies drift_scale() * b.
///
/// Batch terms are summed in ascending index order, so b(x, U) with U a
/// permutation of all indices equals a(x) bit for bit.
class DriftModel {
 public:
  explicit DriftModel(std::shared_ptr<const Dataset> data);
  virtual ~DriftModel() = default;
  DriftModel(const DriftModel&) = delete;
  DriftModel& operator=(const DriftModel&) = delete;

  virtual std::string name() const = 0;
  virtual std::size_t dimension() const = 0;
  /// Factor the step applies to the bracketed drift (1/2 for posterior
  /// sampling with noise 1/sqrt(m)).
  virtual double drift_scale() const { return 1.0; }
  /// Noise scale used by the experiment presets.
  virtual double default_beta() const;

  const Dataset& data() const { return *data_; }
  std::size_t m() const { return data_->m(); }

  void exact_drift(const Vec& x, Vec& out) const;
  Vec exact_drift(const Vec& x) const;
  void estimated_drift(const Vec& x, std::span<const DataIndex> batch, Vec& out) const;
  Vec estimated_drift(const Vec& x, const Batch& batch) const;

  /// Scalar function whose gradient is exact_drift, when one exists.
  virtual std::optional<double> log_density(const Vec& x) const = 0;

  /// Total number of per-datum kernel evaluations performed so far.
  std::uint64_t kernel_evaluations() const { return evaluations_.load(std::memory_order_relaxed); }

 protected:
  /// out = c(x)
  virtual void batch_free_term(const Vec& x, Vec& out) const = 0;
  /// acc += sum_{i in sorted} k(x, xi_i)
  virtual void accumulate(const Vec& x, std::span<const DataIndex> sorted, Vec& acc) const = 0;

  void check_dim(const Vec& x) const;

 private:
  void drift_over(const Vec& x, std::span<const DataIndex> sorted, Vec& out) const;

  std::shared_ptr<const Dataset> data_;
  std::vector<DataIndex> all_indices_;
  mutable std::atomic<std::uint64_t> evaluations_{0};
};

enum class PriorKind { kGaussian, kMixture };

/// Bayesian logistic regression, p(y | iota, x) = g(y x^T iota),
/// g(z) = 1 / (1 + e^{-z}). Bracketed drift:
///   (1/m) grad log pi0(x) + (1/|U|) sum_{i in U} y_i iota_i (1 - g(y_i x^T iota_i)).
class LogisticModel final : public DriftModel {
 public:
  LogisticModel(std::shared_ptr<const Dataset> data, PriorKind prior);

  std::string name() const override;
  std::size_t dimension() const override { return data().feature_dim(); }
  double drift_scale() const override { return 0.5; }
  std::optional<double> log_density(const Vec& x) const override;
  PriorKind prior() const { return prior_; }

 protected:
  void batch_free_term(const Vec& x, Vec& out) const override;
  void accumulate(const Vec& x, std::span<const DataIndex> sorted, Vec& acc) const override;

 private:
  PriorKind prior_;
};

/// Two-parameter posterior with observations (iota_1, iota_2), each
/// coordinate independently 1/2 N(x1, var) + 1/2 N(x1 + x2, var), and a
/// standard Gaussian prior. `variance` is a variance, not a standard
/// deviation.
class MixtureModel final : public DriftModel {
 public:
  MixtureModel(std::shared_ptr<const Dataset> data, double variance = 5.0);

  std::string name() const override { return "gaussian_mixture_2d"; }
  std::size_t dimension() const override { return 2; }
  double drift_scale() const override { return 0.5; }
  std::optional<double> log_density(const Vec& x) const override;
  double variance() const { return variance_; }

 protected:
  void batch_free_term(const Vec& x, Vec& out) const override;
  void accumulate(const Vec& x, std::span<const DataIndex> sorted, Vec& acc) const override;

 private:
  double variance_;
};

/// Ornstein-Uhlenbeck drift b(x, U) = -alpha x + mean_{i in U} xi_i. The
/// linear part does not depend on the batch, which makes both antithetic
/// differences cancel exactly.
class OuModel final : public DriftModel {
 public:
  OuModel(std::shared_ptr<const Dataset> data, double alpha);

  std::string name() const override { return "ou"; }
  std::size_t dimension() const override { return data().feature_dim(); }
  std::optional<double> log_density(const Vec& x) const override;
  double alpha() const { return alpha_; }

 protected:
  void batch_free_term(const Vec& x, Vec& out) const override;
  void accumulate(const Vec& x, std::span<const DataIndex> sorted, Vec& acc) const override;

 private:
  double alpha_;
};

/// Control-variate drift anchored at x_hat:
///   a(x_hat) + b(x, U) - b(x_hat, U).
class ControlVariateDrift {
 public:
  ControlVariateDrift(const DriftModel& model, Vec anchor);

  const Vec& anchor() const { return anchor_; }
  const Vec& anchor_drift() const { return anchor_drift_; }
  void evaluate(const Vec& x, std::span<const DataIndex> batch, Vec& out) const;

 private:
  const DriftModel& model_;
  Vec anchor_;
  Vec anchor_drift_;
};

/// Plain full-gradient ascent on log pi = m * (bracketed drift), i.e.
/// x += step * m * a(x), from `start`. Approximates the posterior mode.
Vec approximate_mode(const DriftModel& model, const Vec& start, int iterations, double step);

}  // namespace masga
