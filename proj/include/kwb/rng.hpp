#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace kwb {

/// Counter-based generator: every draw is a pure function of
/// (seed, stream, index), so sample i is the same under any schedule.
class CounterRng {
 public:
  constexpr CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept
      : key_(mix(seed ^ mix(stream + 0x9e3779b97f4a7c15ULL))) {}

  constexpr std::uint64_t bits(std::uint64_t index) const noexcept { return mix(key_ + mix(index)); }

  /// Uniform in [0, 1).
  constexpr double uniform(std::uint64_t index) const noexcept {
    return static_cast<double>(bits(index) >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller on draws (2*index, 2*index+1).
  double normal(std::uint64_t index) const noexcept {
    const double u1 = 1.0 - uniform(2 * index);  // (0, 1]
    const double u2 = uniform(2 * index + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Derived generator for a sub-task, e.g. one chart point.
  constexpr CounterRng split(std::uint64_t sub) const noexcept { return CounterRng(key_, sub); }

 private:
  // SplitMix64 finaliser.
  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
};

}  // namespace kwb
