#include "masga/rng.hpp"

namespace masga {

namespace {
constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += kGolden;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

NoiseSource::NoiseSource(std::uint64_t master_seed, StreamId id)
    : master_seed_(master_seed), id_(id) {
  std::uint64_t k = splitmix64(master_seed);
  k = splitmix64(k ^ (static_cast<std::uint64_t>(id.ell1) << 32 | id.ell2));
  k = splitmix64(k ^ id.path);
  k = splitmix64(k ^ static_cast<std::uint64_t>(id.role));
  key_ = k;
}

NoiseSource::result_type NoiseSource::operator()() {
  ++counter_;
  return splitmix64(key_ + counter_ * kGolden);
}

void NoiseSource::fill_gaussian(Eigen::Ref<Eigen::VectorXd> out) {
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = gaussian();
}

double NoiseSource::uniform01() {
  // 53 random mantissa bits.
  return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

std::uint64_t NoiseSource::uniform_index(std::uint64_t n) {
  std::uniform_int_distribution<std::uint64_t> dist(0, n - 1);
  return dist(*this);
}

}  // namespace masga
