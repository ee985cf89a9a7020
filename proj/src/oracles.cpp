#include "masga/oracles.hpp"

#include <cmath>
#include <stdexcept>
#include <functional>
#include <memory>
#include <ostream>

#include "masga/errors.hpp"
#include "masga/sde.hpp"

namespace masga {

namespace {

constexpr std::size_t kMaxEnumerationSize = 8;

// sum_{j=1}^k r^{2(k-j)}
double geometric_sum(double r, std::uint64_t k) {
  double total = 0.0;
  double term = 1.0;
  for (std::uint64_t j = 0; j < k; ++j) {
    total += term;
    term *= r * r;
  }
  return total;
}

double population_variance(const std::vector<double>& data) {
  double mean = 0.0;
  for (double v : data) mean += v;
  mean /= static_cast<double>(data.size());
  double var = 0.0;
  for (double v : data) var += (v - mean) * (v - mean);
  return var / static_cast<double>(data.size());
}

void check_enumerable(std::size_t m, std::size_t s) {
  if (m == 0) throw RangeError("enumeration needs a nonempty dataset");
  if (m > kMaxEnumerationSize) {
    throw ComplexityError("enumeration is limited to m <= 8, got m = " + std::to_string(m));
  }
  if (s == 0 || s > m) throw RangeError("batch size must lie in [1, m]");
}

// Calls visit(batch, probability) once per distinct batch.
void for_each_batch(std::size_t m, std::size_t s, ReplacementMode mode,
                    const std::function<void(const std::vector<DataIndex>&, double)>& visit) {
  check_enumerable(m, s);
  std::vector<DataIndex> batch(s);
  std::vector<double> factorial(s + 1, 1.0);
  for (std::size_t i = 1; i <= s; ++i) factorial[i] = factorial[i - 1] * static_cast<double>(i);

  if (mode == ReplacementMode::kWithout) {
    double count = 1.0;
    for (std::size_t i = 0; i < s; ++i) {
      count *= static_cast<double>(m - i) / static_cast<double>(i + 1);
    }
    const double p = 1.0 / std::round(count);
    std::function<void(std::size_t, DataIndex)> rec = [&](std::size_t pos, DataIndex next) {
      if (pos == s) {
        visit(batch, p);
        return;
      }
      for (DataIndex i = next; i < m; ++i) {
        batch[pos] = i;
        rec(pos + 1, i + 1);
      }
    };
    rec(0, 0);
    return;
  }

  const double total = std::pow(static_cast<double>(m), static_cast<double>(s));
  std::function<void(std::size_t, DataIndex)> rec = [&](std::size_t pos, DataIndex next) {
    if (pos == s) {
      double ways = factorial[s];
      std::size_t run = 1;
      for (std::size_t i = 1; i <= s; ++i) {
        if (i < s && batch[i] == batch[i - 1]) {
          ++run;
        } else {
          ways /= factorial[run];
          run = 1;
        }
      }
      visit(batch, ways / total);
      return;
    }
    for (DataIndex i = next; i < m; ++i) {
      batch[pos] = i;
      rec(pos + 1, i);
    }
  };
  rec(0, 0);
}

}  // namespace

double ou_variance_exact(const OuSpec& spec, std::uint64_t k) {
  if (spec.m == 0) throw RangeError("OU spec needs m >= 1");
  const double r = 1.0 - spec.alpha * spec.h;
  return std::pow(r, 2.0 * static_cast<double>(k)) * spec.v0 +
         spec.h / static_cast<double>(spec.m) * geometric_sum(r, k);
}

double ou_variance_subsampled_exact(const OuSpec& spec, std::uint64_t k) {
  const double r = 1.0 - spec.alpha * spec.h;
  return ou_variance_exact(spec, k) + spec.h * spec.h *
                                          subsample_variance_exact(spec.data, spec.s, spec.mode) *
                                          geometric_sum(r, k);
}

double ou_mean_exact(const OuSpec& spec, std::uint64_t k, double x0) {
  double mean = 0.0;
  for (double v : spec.data) mean += v;
  mean /= static_cast<double>(spec.data.size());
  const double r = 1.0 - spec.alpha * spec.h;
  const double rk = std::pow(r, static_cast<double>(k));
  if (spec.alpha == 0.0) return x0 + static_cast<double>(k) * spec.h * mean;
  return rk * x0 + (1.0 - rk) * mean / spec.alpha;
}

double subsample_variance_exact(const std::vector<double>& data, std::size_t s,
                                ReplacementMode mode) {
  const std::size_t m = data.size();
  if (m == 0) throw RangeError("empty dataset");
  if (s == 0) throw RangeError("batch size must be positive");
  if (mode == ReplacementMode::kWithout && s > m) {
    throw RangeError("batch size exceeds dataset size without replacement");
  }
  const double base = population_variance(data) / static_cast<double>(s);
  if (mode == ReplacementMode::kWith) return base;
  if (m == 1) return 0.0;
  return base * static_cast<double>(m - s) / static_cast<double>(m - 1);
}

SubsampleMoments enumerate_subsample_mean(const std::vector<double>& data, std::size_t s,
                                          ReplacementMode mode) {
  double mu = 0.0;
  for (double v : data) mu += v;
  mu /= static_cast<double>(data.size());
  SubsampleMoments out;
  double mean_dev = 0.0;
  for_each_batch(data.size(), s, mode, [&](const std::vector<DataIndex>& batch, double p) {
    double b = 0.0;
    for (DataIndex i : batch) b += data[i];
    b /= static_cast<double>(s);
    const double dev = b - mu;
    mean_dev += p * dev;
    out.variance += p * dev * dev;
    out.fourth_central += p * dev * dev * dev * dev;
    ++out.batches;
  });
  out.mean = mu + mean_dev;
  return out;
}

double subsample_fourth_moment_enumerated(const DriftModel& model, const Vec& x, std::size_t s,
                                          ReplacementMode mode) {
  const Vec a = model.exact_drift(x);
  Vec b(a.size());
  double total = 0.0;
  for_each_batch(model.m(), s, mode, [&](const std::vector<DataIndex>& batch, double p) {
    model.estimated_drift(x, batch, b);
    const double sq = (b - a).squaredNorm();
    total += p * sq * sq;
  });
  return total;
}

bool run_oracle_checks(std::ostream& os, std::uint64_t n_paths) {
  if (n_paths < 2) throw std::invalid_argument("the Monte Carlo check needs at least two paths");
  bool all = true;
  const auto report = [&](const std::string& name, bool ok, const std::string& detail) {
    os << (ok ? "PASS " : "FAIL ") << name << "  " << detail << '\n';
    all = all && ok;
  };

  {
    OuSpec spec;
    const bool ok = ou_variance_exact(spec, 0) == 0.0 &&
                    std::abs(ou_variance_exact(spec, 1) - 0.1) < 1e-15 &&
                    std::abs(ou_variance_exact(spec, 2) - 0.181) < 1e-15;
    report("ou_variance_closed_form", ok,
           "V1=" + std::to_string(ou_variance_exact(spec, 1)) +
               " V2=" + std::to_string(ou_variance_exact(spec, 2)));
  }

  NoiseSource data_noise(20240, StreamId{0, 0, 0, StreamRole::kOracle});
  std::vector<double> generic(kMaxEnumerationSize);
  for (double& v : generic) v = data_noise.gaussian() + (data_noise.uniform01() < 0.3 ? 3.0 : 0.0);

  {
    double worst = 0.0;
    for (std::size_t m = 1; m <= kMaxEnumerationSize; ++m) {
      const std::vector<double> data(generic.begin(), generic.begin() + static_cast<long>(m));
      for (std::size_t s = 1; s <= m; ++s) {
        for (auto mode : {ReplacementMode::kWith, ReplacementMode::kWithout}) {
          const double exact = subsample_variance_exact(data, s, mode);
          const double enumerated = enumerate_subsample_mean(data, s, mode).variance;
          worst = std::max(worst, std::abs(exact - enumerated));
        }
      }
    }
    report("subsample_variance_enumeration", worst <= 1e-12, "max abs diff " + std::to_string(worst));
  }

  {
    double worst_ratio = 0.0;
    for (auto mode : {ReplacementMode::kWith, ReplacementMode::kWithout}) {
      const std::vector<double> data(generic.begin(), generic.begin() + 6);
      const double r = enumerate_subsample_mean(data, 2, mode).fourth_central /
                       enumerate_subsample_mean(data, 1, mode).fourth_central;
      worst_ratio = std::max(worst_ratio, r);
    }
    report("fourth_moment_decay", worst_ratio <= 0.6,
           "max ratio s=2/s=1 " + std::to_string(worst_ratio));
  }

  for (std::size_t m : {std::size_t{1}, std::size_t{16}}) {
    for (std::size_t s : {std::size_t{1}, std::size_t{4}}) {
      auto data = std::make_shared<Dataset>();
      data->rows.resize(static_cast<Eigen::Index>(m), 1);
      for (std::size_t i = 0; i < m; ++i) data->rows(static_cast<Eigen::Index>(i), 0) = generic[i % 8];
      const OuModel model(data, 1.0);
      OuSpec spec;
      spec.m = m;
      spec.s = s;
      for (std::size_t i = 0; i < m; ++i) spec.data.push_back(generic[i % 8]);
      const std::uint64_t k = 20;
      const ChainSpec chain{s, spec.h, k, 1.0 / std::sqrt(static_cast<double>(m)),
                            ReplacementMode::kWith};
      double mean = 0.0;
      double m2 = 0.0;
      for (std::uint64_t p = 0; p < n_paths; ++p) {
        const double x = simulate_chain(model, chain, PathKey{7, 0, 0, p}, Vec::Zero(1))
                             .final_state.position[0];
        const double delta = x - mean;
        mean += delta / static_cast<double>(p + 1);
        m2 += delta * (x - mean);
      }
      const double empirical = m2 / static_cast<double>(n_paths - 1);
      const double exact = ou_variance_subsampled_exact(spec, k);
      const double rel = std::abs(empirical / exact - 1.0);
      // Five standard deviations of a Gaussian sample variance.
      const double tol = 5.0 * std::sqrt(2.0 / static_cast<double>(n_paths - 1));
      report("ou_variance_monte_carlo m=" + std::to_string(m) + " s=" + std::to_string(s),
             rel <= tol, "rel err " + std::to_string(rel) + " tol " + std::to_string(tol));
    }
  }
  return all;
}

}  // namespace masga
