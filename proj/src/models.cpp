#include "masga/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "masga/errors.hpp"

namespace masga {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

// log(1 / (1 + e^{-z})) without overflow.
double log_sigmoid(double z) {
  return z >= 0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
}

// 1 - g(z) = g(-z).
double sigmoid_complement(double z) {
  if (z >= 0) {
    const double e = std::exp(-z);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(z));
}

double log_add_exp(double a, double b) {
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

// Responsibility of the mean-one prior component, g(sum x - d/2).
double mixture_weight(const Vec& x) {
  const double z = x.sum() - 0.5 * static_cast<double>(x.size());
  return 1.0 - sigmoid_complement(z);
}

}  // namespace

Vec gaussian_prior_grad(const Vec& x) { return -x; }

Vec mixture_prior_grad(const Vec& x) {
  return (-x).array() + mixture_weight(x);
}

double gaussian_prior_log_density(const Vec& x) {
  return -0.5 * x.squaredNorm() - 0.5 * static_cast<double>(x.size()) * kLog2Pi;
}

double mixture_prior_log_density(const Vec& x) {
  const double d = static_cast<double>(x.size());
  const double a = -0.5 * x.squaredNorm();
  const double b = -0.5 * (x.array() - 1.0).matrix().squaredNorm();
  return std::log(0.5) + log_add_exp(a, b) - 0.5 * d * kLog2Pi;
}

DriftModel::DriftModel(std::shared_ptr<const Dataset> data) : data_(std::move(data)) {
  if (!data_) throw DimensionError("drift model needs a dataset");
  data_->validate();
  all_indices_.resize(data_->m());
  std::iota(all_indices_.begin(), all_indices_.end(), DataIndex{0});
}

double DriftModel::default_beta() const { return 1.0 / std::sqrt(static_cast<double>(m())); }

void DriftModel::check_dim(const Vec& x) const {
  if (static_cast<std::size_t>(x.size()) != dimension()) {
    throw DimensionError("state has dimension " + std::to_string(x.size()) + ", model expects " +
                         std::to_string(dimension()));
  }
}

void DriftModel::drift_over(const Vec& x, std::span<const DataIndex> sorted, Vec& out) const {
  if (sorted.empty()) throw RangeError("drift estimator needs a nonempty batch");
  thread_local Vec acc;
  acc.setZero(static_cast<Eigen::Index>(dimension()));
  accumulate(x, sorted, acc);
  evaluations_.fetch_add(sorted.size(), std::memory_order_relaxed);
  batch_free_term(x, out);
  out += acc * (1.0 / static_cast<double>(sorted.size()));
}

void DriftModel::exact_drift(const Vec& x, Vec& out) const {
  check_dim(x);
  drift_over(x, all_indices_, out);
}

Vec DriftModel::exact_drift(const Vec& x) const {
  Vec out(static_cast<Eigen::Index>(dimension()));
  exact_drift(x, out);
  return out;
}

void DriftModel::estimated_drift(const Vec& x, std::span<const DataIndex> batch, Vec& out) const {
  check_dim(x);
  thread_local std::vector<DataIndex> sorted;
  sorted.assign(batch.begin(), batch.end());
  std::sort(sorted.begin(), sorted.end());
  if (!sorted.empty() && sorted.back() >= m()) throw RangeError("batch index out of range");
  drift_over(x, sorted, out);
}

Vec DriftModel::estimated_drift(const Vec& x, const Batch& batch) const {
  Vec out(static_cast<Eigen::Index>(dimension()));
  estimated_drift(x, batch.view(), out);
  return out;
}

// ---------------------------------------------------------------------------

LogisticModel::LogisticModel(std::shared_ptr<const Dataset> data, PriorKind prior)
    : DriftModel(std::move(data)), prior_(prior) {
  if (!this->data().has_targets()) throw TargetError("logistic model needs +-1 targets");
}

std::string LogisticModel::name() const {
  return prior_ == PriorKind::kGaussian ? "logistic_gaussian" : "logistic_mixture";
}

void LogisticModel::batch_free_term(const Vec& x, Vec& out) const {
  const double inv_m = 1.0 / static_cast<double>(m());
  if (prior_ == PriorKind::kGaussian) {
    out = -inv_m * x;
  } else {
    out = inv_m * ((-x).array() + mixture_weight(x)).matrix();
  }
}

void LogisticModel::accumulate(const Vec& x, std::span<const DataIndex> sorted, Vec& acc) const {
  const auto& rows = data().rows;
  const auto& y = data().targets;
  for (DataIndex i : sorted) {
    const double yi = y[i];
    const double z = yi * rows.row(i).dot(x);
    acc.noalias() += (yi * sigmoid_complement(z)) * rows.row(i).transpose();
  }
}

std::optional<double> LogisticModel::log_density(const Vec& x) const {
  const double prior = prior_ == PriorKind::kGaussian ? gaussian_prior_log_density(x)
                                                      : mixture_prior_log_density(x);
  double lik = 0.0;
  for (std::size_t i = 0; i < m(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    lik += log_sigmoid(data().targets[row] * data().rows.row(row).dot(x));
  }
  return (prior + lik) / static_cast<double>(m());
}

// ---------------------------------------------------------------------------

MixtureModel::MixtureModel(std::shared_ptr<const Dataset> data, double variance)
    : DriftModel(std::move(data)), variance_(variance) {
  if (this->data().feature_dim() != 2) throw DimensionError("mixture model needs 2-column data");
  if (!(variance > 0)) throw RangeError("mixture variance must be positive");
}

void MixtureModel::batch_free_term(const Vec& x, Vec& out) const {
  out = (-1.0 / static_cast<double>(m())) * x;
}

void MixtureModel::accumulate(const Vec& x, std::span<const DataIndex> sorted, Vec& acc) const {
  const double mu1 = x[0];
  const double mu2 = x[0] + x[1];
  const double inv_var = 1.0 / variance_;
  const auto& rows = data().rows;
  for (DataIndex i : sorted) {
    for (Eigen::Index j = 0; j < 2; ++j) {
      const double v = rows(i, j);
      const double r1 = v - mu1;
      const double r2 = v - mu2;
      // Responsibility of the second component, computed in log space.
      const double l1 = -0.5 * r1 * r1 * inv_var;
      const double l2 = -0.5 * r2 * r2 * inv_var;
      const double w2 = 1.0 / (1.0 + std::exp(l1 - l2));
      const double w1 = 1.0 - w2;
      acc[0] += (w1 * r1 + w2 * r2) * inv_var;
      acc[1] += w2 * r2 * inv_var;
    }
  }
}

std::optional<double> MixtureModel::log_density(const Vec& x) const {
  const double mu1 = x[0];
  const double mu2 = x[0] + x[1];
  const double norm = -0.5 * std::log(2.0 * M_PI * variance_) + std::log(0.5);
  double lik = 0.0;
  for (Eigen::Index i = 0; i < data().rows.rows(); ++i) {
    for (Eigen::Index j = 0; j < 2; ++j) {
      const double v = data().rows(i, j);
      const double l1 = -0.5 * (v - mu1) * (v - mu1) / variance_;
      const double l2 = -0.5 * (v - mu2) * (v - mu2) / variance_;
      lik += norm + log_add_exp(l1, l2);
    }
  }
  return (gaussian_prior_log_density(x) + lik) / static_cast<double>(m());
}

// ---------------------------------------------------------------------------

OuModel::OuModel(std::shared_ptr<const Dataset> data, double alpha)
    : DriftModel(std::move(data)), alpha_(alpha) {
  if (!(alpha >= 0)) throw RangeError("OU alpha must be nonnegative");
}

void OuModel::batch_free_term(const Vec& x, Vec& out) const { out = -alpha_ * x; }

void OuModel::accumulate(const Vec&, std::span<const DataIndex> sorted, Vec& acc) const {
  const auto& rows = data().rows;
  for (DataIndex i : sorted) acc += rows.row(i).transpose();
}

std::optional<double> OuModel::log_density(const Vec& x) const {
  const Vec mean = data().rows.colwise().mean().transpose();
  return -0.5 * alpha_ * x.squaredNorm() + x.dot(mean);
}

// ---------------------------------------------------------------------------

ControlVariateDrift::ControlVariateDrift(const DriftModel& model, Vec anchor)
    : model_(model), anchor_(std::move(anchor)) {
  anchor_drift_ = model_.exact_drift(anchor_);
}

void ControlVariateDrift::evaluate(const Vec& x, std::span<const DataIndex> batch, Vec& out) const {
  thread_local Vec at_anchor;
  model_.estimated_drift(x, batch, out);
  model_.estimated_drift(anchor_, batch, at_anchor);
  out += anchor_drift_ - at_anchor;
}

Vec approximate_mode(const DriftModel& model, const Vec& start, int iterations, double step) {
  Vec x = start;
  Vec grad(x.size());
  const double scale = step * static_cast<double>(model.m());
  for (int it = 0; it < iterations; ++it) {
    model.exact_drift(x, grad);
    x += scale * grad;
  }
  return x;
}

}  // namespace masga
