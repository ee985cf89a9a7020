#include "masga/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <iomanip>
#include <istream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "masga/errors.hpp"

namespace masga {

std::ostream& operator<<(std::ostream& os, const MultiIndex& idx) {
  return os << '(' << idx.ell1 << ',' << idx.ell2 << ')';
}

// ---------------------------------------------------------------------------

TestFunction TestFunction::parse(const std::string& tag) {
  const auto indexed = [&](const std::string& prefix) -> std::optional<std::size_t> {
    if (tag.rfind(prefix + "(", 0) != 0 || tag.back() != ')') return std::nullopt;
    const std::string inner = tag.substr(prefix.size() + 1, tag.size() - prefix.size() - 2);
    try {
      std::size_t pos = 0;
      const unsigned long v = std::stoul(inner, &pos);
      if (pos != inner.size()) throw std::invalid_argument(inner);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("bad index in test function '" + tag + "'");
    }
  };
  if (tag == "norm_sq") return norm_sq();
  if (tag == "norm") return norm();
  if (tag == "log_norm") return log_norm();
  if (auto i = indexed("coordinate")) return coordinate(*i);
  if (auto i = indexed("exp_coordinate")) return exp_coordinate(*i);
  throw ConfigError("unknown test function '" + tag +
                    "' (norm_sq|norm|coordinate(i)|log_norm|exp_coordinate(i))");
}

double TestFunction::operator()(const Vec& x) const {
  switch (kind_) {
    case Kind::kNormSq:
      return x.squaredNorm();
    case Kind::kNorm:
      return x.norm();
    case Kind::kCoordinate:
      return x[static_cast<Eigen::Index>(index_)];
    case Kind::kLogNorm:
      return std::log(std::max(x.norm(), 1e-300));
    case Kind::kExpCoordinate:
      return std::exp(x[static_cast<Eigen::Index>(index_)]);
  }
  return 0.0;
}

std::string TestFunction::tag() const {
  switch (kind_) {
    case Kind::kNormSq:
      return "norm_sq";
    case Kind::kNorm:
      return "norm";
    case Kind::kCoordinate:
      return "coordinate(" + std::to_string(index_) + ")";
    case Kind::kLogNorm:
      return "log_norm";
    case Kind::kExpCoordinate:
      return "exp_coordinate(" + std::to_string(index_) + ")";
  }
  return {};
}

// ---------------------------------------------------------------------------

void LevelStats::update(double sample) {
  ++n;
  const double delta = sample - mean;
  mean += delta / static_cast<double>(n);
  m2 += delta * (sample - mean);
}

void LevelStats::merge(const LevelStats& other) {
  if (other.n == 0) return;
  if (n == 0) {
    const double cost = cost_per_path;
    *this = other;
    if (cost > 0) cost_per_path = cost;
    return;
  }
  const double na = static_cast<double>(n);
  const double nb = static_cast<double>(other.n);
  const double delta = other.mean - mean;
  const double total = na + nb;
  mean += delta * nb / total;
  m2 += other.m2 + delta * delta * na * nb / total;
  n += other.n;
}

double LevelStats::variance() const {
  if (n < 2) throw std::domain_error("variance needs at least two samples");
  return m2 / static_cast<double>(n - 1);
}

double LevelStats::std_error() const { return std::sqrt(variance() / static_cast<double>(n)); }

LevelStats update_stats(LevelStats stats, double sample) {
  stats.update(sample);
  return stats;
}

// ---------------------------------------------------------------------------

namespace {

double weighted_sum(const TestFunction& f, const ChainCluster& cluster) {
  double total = 0.0;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      const auto sub = static_cast<Branch>(r);
      const auto time = static_cast<Branch>(c);
      if (cluster.active(sub, time)) total += cluster.weight(sub, time) * f(cluster.at(sub, time).position);
    }
  }
  return total;
}

}  // namespace

double delta_ant_phi(const TestFunction& f, const ChainCluster& cluster) {
  if (cluster.geometry.coupling != Coupling::kAntithetic) {
    throw std::invalid_argument("delta_ant_phi needs an antithetic cluster");
  }
  return weighted_sum(f, cluster);
}

double delta_phi_plain(const TestFunction& f, const ChainCluster& cluster) {
  if (cluster.geometry.coupling != Coupling::kPlain) {
    throw std::invalid_argument("delta_phi_plain needs a plain cluster");
  }
  return weighted_sum(f, cluster);
}

double plain_difference(double fine_fine, double fine_coarse, double coarse_fine,
                        double coarse_coarse) {
  return (fine_fine - fine_coarse) - (coarse_fine - coarse_coarse);
}

// ---------------------------------------------------------------------------

ClusterSampler::ClusterSampler(const DriftModel& model, TestFunction f, LevelHierarchy hierarchy,
                               Vec x0, std::uint64_t master_seed, ActiveIndices active,
                               Coupling coupling)
    : model_(model),
      f_(f),
      hierarchy_(hierarchy),
      x0_(std::move(x0)),
      seed_(master_seed),
      active_(active),
      coupling_(coupling) {}

ClusterGeometry ClusterSampler::geometry(MultiIndex level) const {
  ClusterGeometry g;
  g.s_fine = hierarchy_.s(level.ell1);
  g.h_fine = hierarchy_.h(level.ell2);
  g.n_fine_steps = hierarchy_.steps(level.ell2);
  g.split_subsampling = level.ell1 > 0;
  g.split_time = level.ell2 > 0;
  g.beta = hierarchy_.beta;
  g.mode = hierarchy_.mode;
  g.coupling = coupling_;
  return g;
}

void ClusterSampler::check_admissible(MultiIndex level) const {
  if ((!active_.subsampling && level.ell1 != 0) || (!active_.time && level.ell2 != 0)) {
    throw LevelCapError("level refines an inactive index");
  }
  if (level.ell1 > 40 || level.ell2 > 40) throw LevelCapError("level index too large");
  if (hierarchy_.mode == ReplacementMode::kWithout && hierarchy_.s(level.ell1) > model_.m()) {
    throw LevelCapError("subsample size " + std::to_string(hierarchy_.s(level.ell1)) +
                        " at ell1 = " + std::to_string(level.ell1) + " exceeds dataset size " +
                        std::to_string(model_.m()));
  }
}

ChainCluster ClusterSampler::cluster(MultiIndex level, std::uint64_t path) const {
  return simulate_cluster(model_, geometry(level), PathKey{seed_, level.ell1, level.ell2, path},
                          x0_);
}

double ClusterSampler::sample(MultiIndex level, std::uint64_t path) const {
  return weighted_sum(f_, cluster(level, path));
}

double ClusterSampler::cost_per_path(MultiIndex level) const {
  return static_cast<double>(geometry(level).kernel_evaluations());
}

SingleChainSampler::SingleChainSampler(const DriftModel& model, TestFunction f,
                                       LevelHierarchy hierarchy, Vec x0,
                                       std::uint64_t master_seed)
    : model_(model), f_(f), hierarchy_(hierarchy), x0_(std::move(x0)), seed_(master_seed) {}

double SingleChainSampler::sample(MultiIndex level, std::uint64_t path) const {
  const ChainSpec spec{hierarchy_.s(level.ell1), hierarchy_.h(level.ell2),
                       hierarchy_.steps(level.ell2), hierarchy_.beta, hierarchy_.mode};
  return f_(simulate_chain(model_, spec, PathKey{seed_, level.ell1, level.ell2, path}, x0_)
                .final_state.position);
}

double SingleChainSampler::cost_per_path(MultiIndex level) const {
  return static_cast<double>(hierarchy_.s(level.ell1) * hierarchy_.steps(level.ell2));
}

void SingleChainSampler::check_admissible(MultiIndex level) const {
  if (hierarchy_.mode == ReplacementMode::kWithout && hierarchy_.s(level.ell1) > model_.m()) {
    throw LevelCapError("subsample size exceeds dataset size");
  }
}

// ---------------------------------------------------------------------------

namespace {

unsigned resolve_threads(unsigned threads, std::uint64_t count) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  return static_cast<unsigned>(std::min<std::uint64_t>(threads, std::max<std::uint64_t>(count, 1)));
}

template <class Fn>
void parallel_for(std::uint64_t count, unsigned threads, Fn&& fn) {
  threads = resolve_threads(threads, count);
  if (threads <= 1) {
    for (std::uint64_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  workers.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) {
    workers.emplace_back([&, t] {
      try {
        for (std::uint64_t i = t; i < count; i += threads) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

std::vector<double> sample_paths(const LevelSampler& sampler, MultiIndex level,
                                 std::uint64_t first, std::uint64_t count, unsigned threads) {
  std::vector<double> out(count);
  parallel_for(count, threads, [&](std::uint64_t i) { out[i] = sampler.sample(level, first + i); });
  return out;
}

void top_up(const LevelSampler& sampler, LevelStats& stats, std::uint64_t target,
            unsigned threads) {
  stats.cost_per_path = sampler.cost_per_path(stats.level);
  if (target <= stats.n) return;
  // Merged in path order, so the statistics do not depend on scheduling.
  for (double v : sample_paths(sampler, stats.level, stats.n, target - stats.n, threads)) {
    stats.update(v);
  }
}

// ---------------------------------------------------------------------------

double amlmc_subsampling_sample(const TestFunction& f, const DriftModel& model, std::uint32_t ell1,
                                std::size_t s0, double h, std::uint64_t n_steps, double beta,
                                const PathKey& key, const Vec& x0, ReplacementMode mode) {
  ClusterGeometry g;
  g.s_fine = s0 << ell1;
  g.h_fine = h;
  g.n_fine_steps = n_steps;
  g.split_subsampling = ell1 > 0;
  g.split_time = false;
  g.beta = beta;
  g.mode = mode;
  return delta_ant_phi(f, simulate_cluster(model, g, key, x0));
}

double amlmc_discretisation_sample(const TestFunction& f, const DriftModel& model,
                                   std::uint32_t ell2, std::size_t s,
                                   const LevelHierarchy& hierarchy, const PathKey& key,
                                   const Vec& x0) {
  ClusterGeometry g;
  g.s_fine = s;
  g.h_fine = hierarchy.h(ell2);
  g.n_fine_steps = hierarchy.steps(ell2);
  g.split_subsampling = false;
  g.split_time = ell2 > 0;
  g.beta = hierarchy.beta;
  g.mode = hierarchy.mode;
  return delta_ant_phi(f, simulate_cluster(model, g, key, x0));
}

namespace {

McResult summarize(const std::vector<double>& values, double cost_per_path) {
  LevelStats stats;
  for (double v : values) stats.update(v);
  McResult r;
  r.n = stats.n;
  r.estimate = stats.mean;
  if (stats.n >= 2) {
    r.variance = stats.variance();
    r.std_error = stats.std_error();
  }
  r.cost = cost_per_path * static_cast<double>(stats.n);
  return r;
}

}  // namespace

McResult standard_mc_estimate(const TestFunction& f, const DriftModel& model, const ChainSpec& spec,
                              const Vec& x0, std::uint64_t master_seed, std::uint64_t n_paths,
                              unsigned threads) {
  std::vector<double> values(n_paths);
  parallel_for(n_paths, threads, [&](std::uint64_t i) {
    values[i] = f(simulate_chain(model, spec, PathKey{master_seed, 0, 0, i}, x0).final_state.position);
  });
  return summarize(values, static_cast<double>(spec.n_steps * spec.s));
}

McResult sgld_cv_estimate(const TestFunction& f, const DriftModel& model, const ChainSpec& spec,
                          const Vec& x_hat, const Vec& x0, std::uint64_t master_seed,
                          std::uint64_t n_paths, unsigned threads) {
  const ControlVariateDrift cv(model, x_hat);
  std::vector<double> values(n_paths);
  parallel_for(n_paths, threads, [&](std::uint64_t i) {
    values[i] = f(simulate_cv_chain(cv, model, spec, PathKey{master_seed, 0, 0, i}, x0)
                      .final_state.position);
  });
  return summarize(values, static_cast<double>(spec.n_steps * 2 * spec.s));
}

// ---------------------------------------------------------------------------

void write_levels_csv(std::ostream& os, const std::vector<LevelStats>& stats) {
  os << "ell1,ell2,n,mean,var,cost_per_path\n";
  std::ostringstream line;
  for (const auto& s : stats) {
    line.str("");
    line << std::setprecision(17) << s.level.ell1 << ',' << s.level.ell2 << ',' << s.n << ','
         << s.mean << ',';
    if (s.n >= 2) {
      line << s.variance();
    } else {
      line << "nan";
    }
    line << ',' << s.cost_per_path << '\n';
    os << line.str();
  }
}

std::vector<LevelStats> read_levels_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ParseError(0, 0, "levels.csv is empty");
  if (line != "ell1,ell2,n,mean,var,cost_per_path") {
    throw ParseError(1, 0, "levels.csv header must be 'ell1,ell2,n,mean,var,cost_per_path'");
  }
  std::vector<LevelStats> out;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 6) {
      throw ParseError(row, cells.size(), "expected 6 columns in levels.csv row " + std::to_string(row));
    }
    LevelStats s;
    try {
      s.level.ell1 = static_cast<std::uint32_t>(std::stoul(cells[0]));
      s.level.ell2 = static_cast<std::uint32_t>(std::stoul(cells[1]));
      s.n = std::stoull(cells[2]);
      s.mean = std::stod(cells[3]);
      const double var = std::stod(cells[4]);
      s.m2 = s.n >= 2 ? var * static_cast<double>(s.n - 1) : 0.0;
      s.cost_per_path = std::stod(cells[5]);
    } catch (const std::exception&) {
      throw ParseError(row, 0, "non-numeric value in levels.csv row " + std::to_string(row));
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace masga
