#include "masga/dataset.hpp"

#include <algorithm>
#include <string>

#include "masga/errors.hpp"

namespace masga {

void Dataset::validate() const {
  if (rows.rows() < 1 || rows.cols() < 1) throw DimensionError("dataset must have m >= 1 rows");
  if (has_targets()) {
    if (targets.size() != rows.rows()) throw DimensionError("target count does not match rows");
    for (Eigen::Index i = 0; i < targets.size(); ++i) {
      if (targets[i] != 1.0 && targets[i] != -1.0) {
        throw TargetError("target at row " + std::to_string(i) + " is not +-1");
      }
    }
  }
}

const char* to_string(ReplacementMode mode) {
  return mode == ReplacementMode::kWith ? "with" : "without";
}

ReplacementMode replacement_mode_from_string(const std::string& name) {
  if (name == "with") return ReplacementMode::kWith;
  if (name == "without") return ReplacementMode::kWithout;
  throw ConfigError("unknown replacement mode '" + name + "' (expected with|without)");
}

void sample_batch_into(NoiseSource& noise, std::size_t s, std::size_t m, ReplacementMode mode,
                       Batch& out) {
  out.mode = mode;
  out.indices.resize(s);
  if (m == 0) throw RangeError("cannot sample from an empty dataset");
  if (mode == ReplacementMode::kWith) {
    for (auto& idx : out.indices) idx = static_cast<DataIndex>(noise.uniform_index(m));
    return;
  }
  if (s > m) {
    throw RangeError("batch size " + std::to_string(s) + " exceeds dataset size " +
                     std::to_string(m) + " without replacement");
  }
  if (4 * s <= m) {
    // Sequential rejection: uniform over ordered s-tuples of distinct indices.
    for (std::size_t i = 0; i < s; ++i) {
      DataIndex candidate;
      do {
        candidate = static_cast<DataIndex>(noise.uniform_index(m));
      } while (std::find(out.indices.begin(), out.indices.begin() + static_cast<std::ptrdiff_t>(i),
                         candidate) != out.indices.begin() + static_cast<std::ptrdiff_t>(i));
      out.indices[i] = candidate;
    }
    return;
  }
  // Partial Fisher-Yates.
  std::vector<DataIndex> pool(m);
  for (std::size_t i = 0; i < m; ++i) pool[i] = static_cast<DataIndex>(i);
  for (std::size_t i = 0; i < s; ++i) {
    const std::size_t j = i + noise.uniform_index(m - i);
    std::swap(pool[i], pool[j]);
    out.indices[i] = pool[i];
  }
}

Batch sample_batch(NoiseSource& noise, std::size_t s, std::size_t m, ReplacementMode mode) {
  Batch b;
  sample_batch_into(noise, s, m, mode, b);
  return b;
}

std::pair<std::span<const DataIndex>, std::span<const DataIndex>> halves(
    std::span<const DataIndex> batch) {
  if (batch.size() % 2 != 0) {
    throw RangeError("cannot split a batch of odd size " + std::to_string(batch.size()));
  }
  const std::size_t half = batch.size() / 2;
  return {batch.first(half), batch.subspan(half)};
}

std::pair<Batch, Batch> split_batch(const Batch& batch) {
  auto [lo, hi] = halves(batch.view());
  return {Batch{{lo.begin(), lo.end()}, batch.mode}, Batch{{hi.begin(), hi.end()}, batch.mode}};
}

}  // namespace masga
