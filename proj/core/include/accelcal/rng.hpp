#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace accelcal {

/// Counter-based pseudo-random generator (SplitMix64). Every draw is a pure
/// function of (seed, counter), so streams are reproducible across platforms
/// and can be split without shared state. Gaussian variates use Box-Muller
/// on consecutive counter outputs.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  /// Standard normal variate.
  double next_gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    // u1 in (0, 1] so the log is finite.
    const double u1 = 1.0 - next_double();
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  /// Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) {
    // Multiply-shift bounded draw; bias is < 2^-64 per call and identical on
    // every platform, which matters more here than perfect uniformity.
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// 64-bit FNV-1a, used to fold stream tags into derived seeds.
constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (char c : s) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001B3ull;
  }
  return h;
}

constexpr std::uint64_t splitmix_finalize(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Derives an independent child seed from a root seed, a purpose tag, and up
/// to two indices. All randomness in the toolkit flows from one root seed
/// through this function; the derivation is stable across releases.
constexpr std::uint64_t derive_seed(std::uint64_t root, std::string_view tag,
                                    std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t h = splitmix_finalize(root ^ fnv1a(tag));
  h = splitmix_finalize(h ^ (a + 0x9E3779B97F4A7C15ull));
  h = splitmix_finalize(h ^ (b + 0xD1B54A32D192ED03ull));
  return h;
}

}  // namespace accelcal
