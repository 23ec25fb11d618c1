#pragma once

#include <cstdint>

namespace fnns {

/// SplitMix64 (Steele, Lea, Flood 2014). Used for every seeded draw in the
/// toolkit so weights and shuffles are identical across standard libraries.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next() noexcept {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform on the 2^24-point grid {k * 2^-24} in [0, 1); exact in binary32.
  float unit() noexcept { return static_cast<float>(next() >> 40) * 0x1.0p-24f; }

  /// Uniform in [lo, hi); lo + (hi - lo) * unit().
  float uniform(float lo, float hi) noexcept { return lo + (hi - lo) * unit(); }

  /// Uniform integer in [0, n), n > 0. Lemire's multiply-shift without rejection;
  /// the bias is below 2^-32 for the small n used here.
  std::uint64_t below(std::uint64_t n) noexcept {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next()) * n) >> 64);
  }

 private:
  std::uint64_t state_;
};

}  // namespace fnns
