#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string_view>
#include <utility>

namespace stainbench {

// SplitMix64 (Steele, Lea & Flood 2014), version 1 of the stream layout.
//
// All randomness in the toolkit flows through this generator. Distributions
// are implemented here rather than with <random> because the standard
// distributions are implementation-defined and would make seeded outputs
// differ between standard libraries. Do not change the constants or the
// derivation rule without bumping kRngVersion: recorded seeds depend on both.
class SplitMix64 {
 public:
  static constexpr int kRngVersion = 1;
  using result_type = std::uint64_t;

  explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }

  constexpr result_type operator()() noexcept {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix(state_);
  }

  // Independent substream for (seed, index). Used so that parallel work items
  // (bootstrap iterations, tiles) draw identical numbers regardless of
  // execution order.
  static constexpr SplitMix64 substream(std::uint64_t seed, std::uint64_t index) noexcept {
    return SplitMix64(mix(mix(seed ^ 0xD1B54A32D192ED03ULL) + index * 0x9E3779B97F4A7C15ULL));
  }

  // Uniform on [0, 1) with 53 bits of resolution.
  constexpr double uniform() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, bound), Lemire's multiply-shift with rejection.
  std::uint64_t below(std::uint64_t bound) noexcept {
    if (bound == 0) {
      return 0;
    }
    unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        m = static_cast<unsigned __int128>((*this)()) * bound;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  // Standard normal via Box-Muller; one draw per call.
  double normal() noexcept {
    double u1 = uniform();
    while (u1 <= 0.0) {
      u1 = uniform();
    }
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double sd) noexcept { return mean + sd * normal(); }

  // Fisher-Yates; std::shuffle is avoided for the same portability reason.
  template <typename T>
  void shuffle(std::span<T> items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

// 64-bit FNV-1a; maps names (slide ids) to stable substream indices.
constexpr std::uint64_t fnv1a(std::string_view text) noexcept {
  std::uint64_t hash = 0xCBF29CE484222325ULL;
  for (char c : text) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 0x100000001B3ULL;
  }
  return hash;
}

}  // namespace stainbench
