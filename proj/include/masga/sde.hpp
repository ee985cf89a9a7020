#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "masga/dataset.hpp"
#include "masga/models.hpp"
#include "masga/rng.hpp"

namespace masga {

/// States beyond this sup-norm are treated as diverged.
inline constexpr double kDivergenceBound = 1e8;

struct ChainState {
  Vec position;
  std::uint64_t step_index = 0;
};

/// position + h * drift + beta * sqrt(h) * z. Throws DivergenceError on a
/// non-finite drift or result, or when the result leaves the divergence box.
ChainState sgld_step(const ChainState& state, const Vec& drift, double h, double beta,
                     const Vec& z);

/// (z1 + z2) / sqrt(2): the coarse Gaussian increment synchronously coupled to
/// two fine increments.
Vec coarse_increment(const Vec& z1, const Vec& z2);

/// Identifies the random streams of one sample path.
struct PathKey {
  std::uint64_t master_seed = 0;
  std::uint32_t ell1 = 0;
  std::uint32_t ell2 = 0;
  std::uint64_t path = 0;

  NoiseSource stream(StreamRole role) const {
    return NoiseSource(master_seed, StreamId{ell1, ell2, path, role});
  }
};

struct ChainSpec {
  std::size_t s = 1;
  double h = 0.0;
  std::uint64_t n_steps = 0;
  double beta = 0.0;
  ReplacementMode mode = ReplacementMode::kWithout;
};

struct Trajectory {
  ChainState final_state;
  std::vector<Vec> path;  // x_0..x_n when recorded
};

/// A single SGLD chain drawing a fresh batch of size s at every step. The
/// drift is scaled by model.drift_scale().
Trajectory simulate_chain(const DriftModel& model, const ChainSpec& spec, const PathKey& key,
                          const Vec& x0, bool record_path = false);

/// Same chain driven by the control-variate drift.
Trajectory simulate_cv_chain(const ControlVariateDrift& drift, const DriftModel& model,
                             const ChainSpec& spec, const PathKey& key, const Vec& x0);

/// Roles along one index of a cluster: fine, first coarse copy (c-), second
/// coarse copy (c+). The plain coupling uses only kFine and kCoarseMinus (as
/// its single independently driven coarse chain).
enum class Branch : int { kFine = 0, kCoarseMinus = 1, kCoarsePlus = 2 };

enum class Coupling { kAntithetic, kPlain };

/// Geometry of one level sample: the finest chain uses batches of s_fine and
/// steps of h_fine. Each split index adds coarse copies along it.
struct ClusterGeometry {
  std::size_t s_fine = 1;
  double h_fine = 0.0;
  std::uint64_t n_fine_steps = 0;
  bool split_subsampling = false;
  bool split_time = false;
  double beta = 0.0;
  ReplacementMode mode = ReplacementMode::kWithout;
  Coupling coupling = Coupling::kAntithetic;

  /// Number of per-datum kernel evaluations one cluster performs.
  std::uint64_t kernel_evaluations() const;
};

/// Up to nine coupled chains indexed (subsampling branch, time branch).
/// Labels follow X^{subsampling,discretisation}, e.g. "c-f" is coarse minus
/// in subsampling and fine in time.
struct ChainCluster {
  ClusterGeometry geometry;
  std::array<ChainState, 9> chains;

  const ChainState& at(Branch sub, Branch time) const {
    return chains[static_cast<int>(sub) * 3 + static_cast<int>(time)];
  }
  ChainState& at(Branch sub, Branch time) {
    return chains[static_cast<int>(sub) * 3 + static_cast<int>(time)];
  }
  bool active(Branch sub, Branch time) const;
  /// Weight of the chain in the nested difference: product over the two
  /// indices of 1 (fine) and -1/2 per antithetic copy, or -1 for the plain
  /// coarse chain.
  double weight(Branch sub, Branch time) const;

  /// sum over active chains of weight * position (the identity-f difference).
  Vec psi() const;
};

std::string chain_label(Branch sub, Branch time);

/// One 2-step block as consumed by the cluster, for replay checks.
struct BlockTrace {
  Vec z1;
  Vec z2;
  Vec z_coarse;
};

/// Simulates one cluster over geometry.n_fine_steps fine steps from x0.
///
/// Antithetic coupling: every 2-step block draws Z_{k+1}, Z_{k+2} and fine
/// batches U_k, U_{k+1}. Fine-in-time chains step twice with (Z_{k+1}, U_k)
/// and (Z_{k+2}, U_{k+1}); the c- time copy takes one 2h step with batch U_k,
/// the c+ copy with U_{k+1}, both with sqrt(2h) (Z_{k+1}+Z_{k+2})/sqrt(2).
/// Subsampling branch f uses the whole batch, c- its first half and c+ its
/// second half.
///
/// Plain coupling shares the Gaussians but gives each coarse chain its own
/// independently drawn batches, with the fine chain identical to the
/// antithetic fine chain for the same key.
ChainCluster simulate_cluster(const DriftModel& model, const ClusterGeometry& geometry,
                              const PathKey& key, const Vec& x0,
                              std::vector<BlockTrace>* trace = nullptr);

/// Mean of |X_k|^4 over n_paths chains at every step k = 0..n_steps.
std::vector<double> fourth_moment_profile(const DriftModel& model, const ChainSpec& spec,
                                          std::uint64_t master_seed, std::uint64_t n_paths,
                                          const Vec& x0);

}  // namespace masga
