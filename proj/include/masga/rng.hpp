#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace masga {

/// What a stream is used for inside one sample path. Distinct roles of the
/// same (level, path) are independent streams.
enum class StreamRole : std::uint32_t {
  kGaussian = 1,
  kFineBatch = 2,
  // Independent batches for the non-antithetic (plain) couplings.
  kPlainSubCoarseBatch = 3,
  kPlainTimeCoarseBatch = 4,
  kPlainBothCoarseBatch = 5,
  kSingleChainGaussian = 6,
  kSingleChainBatch = 7,
  kDataGeneration = 8,
  kOracle = 9,
};

struct StreamId {
  std::uint32_t ell1 = 0;
  std::uint32_t ell2 = 0;
  std::uint64_t path = 0;
  StreamRole role = StreamRole::kGaussian;
};

/// Counter-based random source. Output number n of a stream is a pure
/// function of (master_seed, stream id, n): the key is a hash of the seed and
/// the stream id, and draw n is splitmix64(key + n * golden). Two sources with
/// the same key produce identical sequences no matter which thread runs them.
class NoiseSource {
 public:
  using result_type = std::uint64_t;

  NoiseSource(std::uint64_t master_seed, StreamId id);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()();

  double gaussian() { return normal_(*this); }
  void fill_gaussian(Eigen::Ref<Eigen::VectorXd> out);
  double uniform01();
  /// Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n);

  std::uint64_t master_seed() const { return master_seed_; }
  const StreamId& id() const { return id_; }
  /// Number of raw 64-bit words consumed so far.
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t master_seed_;
  StreamId id_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace masga
