#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace roomsense {

/// SplitMix64 step. Used to expand seeds and to derive per-trial, per-device
/// and per-member seeds: derive_seed(base, i) = splitmix64(base ^ splitmix64(i)).
std::uint64_t splitmix64(std::uint64_t x) noexcept;
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) noexcept;

/// xoshiro256** 1.0 (Blackman & Vigna), state seeded by four successive
/// SplitMix64 outputs. All distributions below are defined in terms of
/// next() only, so sequences are bit-stable across platforms and compilers.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) noexcept;

  std::uint64_t next() noexcept;

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept;
  /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t n) noexcept;
  /// Standard normal via Box-Muller (one value per two uniforms, no caching).
  double normal() noexcept;
  double normal(double mean, double stddev) noexcept { return mean + stddev * normal(); }
  bool bernoulli(double p) noexcept { return uniform() < p; }

  /// Fisher-Yates, iterating from the back.
  template <class T>
  void shuffle(std::vector<T>& v) noexcept {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = below(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::array<std::uint64_t, 4> s_{};
};

}  // namespace roomsense
