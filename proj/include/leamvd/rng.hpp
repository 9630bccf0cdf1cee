#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace leamvd {

/// Single seedable random stream. Every stochastic component takes an Rng&
/// so a run consumes one stream in a fixed, documented order.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() { return normal_(engine_); }
  /// Uniform integer on [0, n).
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }
  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Seed for an independent sub-stream (layer, trainer, ...) of a run seed.
/// splitmix64 finalizer over base and stream id.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace leamvd
