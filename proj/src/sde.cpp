#include "masga/sde.hpp"

#include <cmath>

#include "masga/errors.hpp"

namespace masga {

namespace {

void check_finite(const Vec& v, std::uint64_t step, const std::string& chain, const char* what) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i]) || std::abs(v[i]) > kDivergenceBound) {
      throw DivergenceError(step, chain,
                            std::string(what) + " diverged in chain " + chain + " at step " +
                                std::to_string(step));
    }
  }
}

// x += h * drift + noise_scale * z, with the divergence checks of sgld_step.
void advance(ChainState& state, const Vec& drift, double h, double noise_scale, const Vec& z,
             const std::string& label) {
  for (Eigen::Index i = 0; i < drift.size(); ++i) {
    if (!std::isfinite(drift[i])) {
      throw DivergenceError(state.step_index, label,
                            "non-finite drift in chain " + label + " at step " +
                                std::to_string(state.step_index));
    }
  }
  state.position.noalias() += h * drift;
  state.position.noalias() += noise_scale * z;
  ++state.step_index;
  check_finite(state.position, state.step_index, label, "state");
}

}  // namespace

ChainState sgld_step(const ChainState& state, const Vec& drift, double h, double beta,
                     const Vec& z) {
  if (!(h > 0)) throw RangeError("step size must be positive");
  if (drift.size() != state.position.size() || z.size() != state.position.size()) {
    throw DimensionError("drift, noise and state dimensions differ");
  }
  ChainState next = state;
  advance(next, drift, h, beta * std::sqrt(h), z, "single");
  return next;
}

Vec coarse_increment(const Vec& z1, const Vec& z2) {
  if (z1.size() != z2.size()) throw DimensionError("coarse increment of unequal dimensions");
  return (z1 + z2) * M_SQRT1_2;
}

Trajectory simulate_chain(const DriftModel& model, const ChainSpec& spec, const PathKey& key,
                          const Vec& x0, bool record_path) {
  if (!(spec.h > 0)) throw RangeError("step size must be positive");
  if (spec.s == 0) throw RangeError("batch size must be positive");
  if (spec.mode == ReplacementMode::kWithout && spec.s > model.m()) {
    throw RangeError("batch size exceeds dataset size without replacement");
  }
  NoiseSource gauss = key.stream(StreamRole::kSingleChainGaussian);
  NoiseSource batches = key.stream(StreamRole::kSingleChainBatch);

  Trajectory out;
  out.final_state.position = x0;
  if (record_path) out.path.push_back(x0);
  const double scale = model.drift_scale();
  const double noise = spec.beta * std::sqrt(spec.h);
  Vec z(x0.size());
  Vec drift(x0.size());
  Batch batch;
  for (std::uint64_t k = 0; k < spec.n_steps; ++k) {
    gauss.fill_gaussian(z);
    sample_batch_into(batches, spec.s, model.m(), spec.mode, batch);
    model.estimated_drift(out.final_state.position, batch.view(), drift);
    drift *= scale;
    advance(out.final_state, drift, spec.h, noise, z, "single");
    if (record_path) out.path.push_back(out.final_state.position);
  }
  return out;
}

Trajectory simulate_cv_chain(const ControlVariateDrift& cv, const DriftModel& model,
                             const ChainSpec& spec, const PathKey& key, const Vec& x0) {
  if (!(spec.h > 0)) throw RangeError("step size must be positive");
  NoiseSource gauss = key.stream(StreamRole::kSingleChainGaussian);
  NoiseSource batches = key.stream(StreamRole::kSingleChainBatch);
  Trajectory out;
  out.final_state.position = x0;
  const double scale = model.drift_scale();
  const double noise = spec.beta * std::sqrt(spec.h);
  Vec z(x0.size());
  Vec drift(x0.size());
  Batch batch;
  for (std::uint64_t k = 0; k < spec.n_steps; ++k) {
    gauss.fill_gaussian(z);
    sample_batch_into(batches, spec.s, model.m(), spec.mode, batch);
    cv.evaluate(out.final_state.position, batch.view(), drift);
    drift *= scale;
    advance(out.final_state, drift, spec.h, noise, z, "cv");
  }
  return out;
}

// ---------------------------------------------------------------------------

std::uint64_t ClusterGeometry::kernel_evaluations() const {
  // Antithetic: each split doubles the work. Plain: a split adds one coarse
  // chain at half the work of the fine one.
  std::uint64_t num = 1;
  std::uint64_t den = 1;
  const bool plain = coupling == Coupling::kPlain;
  for (bool split : {split_subsampling, split_time}) {
    if (!split) continue;
    num *= plain ? 3 : 2;
    den *= plain ? 2 : 1;
  }
  return s_fine * n_fine_steps * num / den;
}

bool ChainCluster::active(Branch sub, Branch time) const {
  const auto within = [&](Branch b, bool split) {
    if (b == Branch::kFine) return true;
    if (!split) return false;
    return geometry.coupling == Coupling::kAntithetic || b == Branch::kCoarseMinus;
  };
  return within(sub, geometry.split_subsampling) && within(time, geometry.split_time);
}

double ChainCluster::weight(Branch sub, Branch time) const {
  const auto w = [&](Branch b) {
    if (b == Branch::kFine) return 1.0;
    return geometry.coupling == Coupling::kAntithetic ? -0.5 : -1.0;
  };
  return w(sub) * w(time);
}

Vec ChainCluster::psi() const {
  Vec out = Vec::Zero(chains[0].position.size());
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      const auto sub = static_cast<Branch>(r);
      const auto time = static_cast<Branch>(c);
      if (active(sub, time)) out += weight(sub, time) * at(sub, time).position;
    }
  }
  return out;
}

std::string chain_label(Branch sub, Branch time) {
  static const char* names[] = {"f", "c-", "c+"};
  return std::string(names[static_cast<int>(sub)]) + names[static_cast<int>(time)];
}

namespace {

// Batch a subsampling branch reads out of the fine batch.
std::span<const DataIndex> branch_batch(Branch sub, std::span<const DataIndex> fine) {
  if (sub == Branch::kFine) return fine;
  const auto [lo, hi] = halves(fine);
  return sub == Branch::kCoarseMinus ? lo : hi;
}

struct ClusterStepper {
  const DriftModel& model;
  const ClusterGeometry& g;
  ChainCluster& cluster;
  std::array<std::string, 9> labels;
  Vec drift;
  double scale;

  ClusterStepper(const DriftModel& m, const ClusterGeometry& geo, ChainCluster& c)
      : model(m), g(geo), cluster(c), drift(m.dimension()), scale(m.drift_scale()) {
    for (int r = 0; r < 3; ++r)
      for (int t = 0; t < 3; ++t)
        labels[r * 3 + t] = chain_label(static_cast<Branch>(r), static_cast<Branch>(t));
  }

  void step(Branch sub, Branch time, std::span<const DataIndex> batch, double h,
            double noise_scale, const Vec& z) {
    ChainState& state = cluster.at(sub, time);
    model.estimated_drift(state.position, batch, drift);
    drift *= scale;
    advance(state, drift, h, noise_scale, z, labels[static_cast<int>(sub) * 3 + static_cast<int>(time)]);
  }
};

}  // namespace

ChainCluster simulate_cluster(const DriftModel& model, const ClusterGeometry& g, const PathKey& key,
                              const Vec& x0, std::vector<BlockTrace>* trace) {
  if (!(g.h_fine > 0)) throw RangeError("step size must be positive");
  if (g.s_fine == 0) throw RangeError("batch size must be positive");
  if (g.split_time && g.n_fine_steps % 2 != 0) {
    throw RangeError("a time-split cluster needs an even number of fine steps");
  }
  if (g.split_subsampling && g.s_fine % 2 != 0) {
    throw RangeError("a subsampling-split cluster needs an even fine batch size");
  }
  if (g.mode == ReplacementMode::kWithout && g.s_fine > model.m()) {
    throw RangeError("fine batch size " + std::to_string(g.s_fine) + " exceeds dataset size " +
                     std::to_string(model.m()));
  }
  if (static_cast<std::size_t>(x0.size()) != model.dimension()) {
    throw DimensionError("initial state has the wrong dimension");
  }

  ChainCluster cluster;
  cluster.geometry = g;
  for (auto& c : cluster.chains) c.position = x0;

  const bool plain = g.coupling == Coupling::kPlain;
  const Branch sub_branches[] = {Branch::kFine, Branch::kCoarseMinus, Branch::kCoarsePlus};
  const int n_sub = !g.split_subsampling ? 1 : (plain ? 2 : 3);

  NoiseSource gauss = key.stream(StreamRole::kGaussian);
  NoiseSource fine_batches = key.stream(StreamRole::kFineBatch);
  NoiseSource plain_sub = key.stream(StreamRole::kPlainSubCoarseBatch);
  NoiseSource plain_time = key.stream(StreamRole::kPlainTimeCoarseBatch);
  NoiseSource plain_both = key.stream(StreamRole::kPlainBothCoarseBatch);

  ClusterStepper stepper(model, g, cluster);
  const std::size_t d = model.dimension();
  const std::size_t s_half = g.s_fine / 2;
  const double h = g.h_fine;
  const double fine_noise = g.beta * std::sqrt(h);
  const double coarse_noise = g.beta * std::sqrt(2.0 * h);
  Vec z1(d), z2(d), zc(d);
  Batch u0, u1, indep;

  // Batch for subsampling branch `sub` of a fine-in-time chain.
  const auto fine_time_batch = [&](Branch sub, const Batch& u) -> std::span<const DataIndex> {
    if (!plain || sub == Branch::kFine) return branch_batch(sub, u.view());
    sample_batch_into(plain_sub, s_half, model.m(), g.mode, indep);
    return indep.view();
  };

  if (!g.split_time) {
    for (std::uint64_t k = 0; k < g.n_fine_steps; ++k) {
      gauss.fill_gaussian(z1);
      sample_batch_into(fine_batches, g.s_fine, model.m(), g.mode, u0);
      for (int r = 0; r < n_sub; ++r) {
        stepper.step(sub_branches[r], Branch::kFine, fine_time_batch(sub_branches[r], u0), h,
                     fine_noise, z1);
      }
    }
    return cluster;
  }

  for (std::uint64_t k = 0; k < g.n_fine_steps; k += 2) {
    gauss.fill_gaussian(z1);
    gauss.fill_gaussian(z2);
    sample_batch_into(fine_batches, g.s_fine, model.m(), g.mode, u0);
    sample_batch_into(fine_batches, g.s_fine, model.m(), g.mode, u1);
    zc = coarse_increment(z1, z2);
    if (trace) trace->push_back(BlockTrace{z1, z2, zc});

    for (int r = 0; r < n_sub; ++r) {
      const Branch sub = sub_branches[r];
      stepper.step(sub, Branch::kFine, fine_time_batch(sub, u0), h, fine_noise, z1);
      stepper.step(sub, Branch::kFine, fine_time_batch(sub, u1), h, fine_noise, z2);
      if (!plain) {
        stepper.step(sub, Branch::kCoarseMinus, branch_batch(sub, u0.view()), 2.0 * h,
                     coarse_noise, zc);
        stepper.step(sub, Branch::kCoarsePlus, branch_batch(sub, u1.view()), 2.0 * h,
                     coarse_noise, zc);
      } else {
        NoiseSource& src = sub == Branch::kFine ? plain_time : plain_both;
        const std::size_t size = sub == Branch::kFine ? g.s_fine : s_half;
        sample_batch_into(src, size, model.m(), g.mode, indep);
        stepper.step(sub, Branch::kCoarseMinus, indep.view(), 2.0 * h, coarse_noise, zc);
      }
    }
  }
  return cluster;
}

std::vector<double> fourth_moment_profile(const DriftModel& model, const ChainSpec& spec,
                                          std::uint64_t master_seed, std::uint64_t n_paths,
                                          const Vec& x0) {
  std::vector<double> profile(spec.n_steps + 1, 0.0);
  for (std::uint64_t p = 0; p < n_paths; ++p) {
    const Trajectory t = simulate_chain(model, spec, PathKey{master_seed, 0, 0, p}, x0, true);
    for (std::size_t k = 0; k < t.path.size(); ++k) {
      const double r2 = t.path[k].squaredNorm();
      profile[k] += r2 * r2;
    }
  }
  for (auto& v : profile) v /= static_cast<double>(n_paths);
  return profile;
}

}  // namespace masga
