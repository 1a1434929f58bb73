#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace scenario_ddc {

/// SplitMix64 finalizer. Bijective on 64-bit words.
[[nodiscard]] std::uint64_t mix64(std::uint64_t x) noexcept;

/// Derives an independent substream seed from a parent seed and a path of
/// indices. The result depends only on the arguments, so substreams consumed
/// by concurrent workers are reproducible regardless of scheduling.
[[nodiscard]] std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) noexcept;
[[nodiscard]] std::uint64_t derive_seed(std::uint64_t parent,
                                        std::initializer_list<std::uint64_t> path) noexcept;

/// Seeded 64-bit engine with the handful of draws the library needs.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace scenario_ddc
