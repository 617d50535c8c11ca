#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>

namespace uqseg {

// Deterministic, splittable random stream. All randomness in the project goes
// through this class: the engine is a mt19937_64 (bit-stable across
// platforms) and the float/normal draws below avoid std::*_distribution,
// whose output is implementation-defined.
class SplitRng {
 public:
  explicit SplitRng(std::uint64_t seed) : seed_(seed), engine_(mix(seed ^ kStreamSalt)) {}

  // Derived independent stream; does not disturb this stream's state.
  SplitRng child(std::uint64_t tag) const { return SplitRng(mix(seed_ + 0x9e3779b97f4a7c15ULL * (tag + 1))); }

  SplitRng child(std::string_view tag) const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : tag) {
      h ^= static_cast<std::uint8_t>(c);
      h *= 0x100000001b3ULL;
    }
    return child(h);
  }

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Standard normal via Box-Muller (no cached second value, so the draw
  // count per call is fixed and streams stay reproducible).
  double next_normal() {
    double u1 = 1.0 - next_double();  // (0, 1]
    double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Uniform integer in [0, n), rejection-sampled to avoid modulo bias.
  std::uint64_t next_below(std::uint64_t n) {
    if (n == 0) return 0;
    std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  bool bernoulli(double p) { return next_double() < p; }

  static std::uint64_t mix(std::uint64_t x) {
    // splitmix64 finalizer
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

 private:
  static constexpr std::uint64_t kStreamSalt = 0x5851f42d4c957f2dULL;

  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

// Per-case stream derivation used by generators and simulators:
// hash(master_seed, case_index).
inline std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t index) {
  return SplitRng::mix(master_seed ^ SplitRng::mix(index + 1));
}

}  // namespace uqseg
