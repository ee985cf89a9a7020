#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "masga/rng.hpp"

namespace masga {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using DataIndex = std::uint32_t;

/// Observations xi_1..xi_m, one per row. Classification data additionally
/// carries targets in {-1, +1}.
struct Dataset {
  RowMatrix rows;
  Eigen::VectorXd targets;  // empty unless the data is labelled

  std::size_t m() const { return static_cast<std::size_t>(rows.rows()); }
  std::size_t feature_dim() const { return static_cast<std::size_t>(rows.cols()); }
  bool has_targets() const { return targets.size() > 0; }

  /// Throws if empty, if the target count mismatches, or a target is not +-1.
  void validate() const;
};

enum class ReplacementMode { kWith, kWithout };

const char* to_string(ReplacementMode mode);
ReplacementMode replacement_mode_from_string(const std::string& name);

struct Batch {
  std::vector<DataIndex> indices;
  ReplacementMode mode = ReplacementMode::kWithout;

  std::size_t size() const { return indices.size(); }
  std::span<const DataIndex> view() const { return indices; }
};

/// Draws s indices from [0, m). Without replacement the indices are distinct
/// and come in uniformly random order, so any fixed split of the batch is a
/// uniformly random partition. Throws RangeError if s > m without replacement.
Batch sample_batch(NoiseSource& noise, std::size_t s, std::size_t m, ReplacementMode mode);

/// In-place variant used on hot paths; reuses out's storage.
void sample_batch_into(NoiseSource& noise, std::size_t s, std::size_t m, ReplacementMode mode,
                       Batch& out);

/// First and last half of an even-sized batch.
std::pair<Batch, Batch> split_batch(const Batch& batch);

std::pair<std::span<const DataIndex>, std::span<const DataIndex>> halves(
    std::span<const DataIndex> batch);

}  // namespace masga
