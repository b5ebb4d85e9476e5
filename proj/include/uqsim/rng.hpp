#pragma once

// Reproducible random streams. Every stochastic consumer (trajectory,
// diffusion path) owns one stream seeded from (master seed, index), so
// results do not depend on scheduling or thread count.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace uqsim {

// splitmix64: cheap, well-mixed seed derivation.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  static RandomStream for_trajectory(std::uint64_t master_seed,
                                     std::uint64_t index) {
    return RandomStream(splitmix64(master_seed) ^ splitmix64(index + 1));
  }

  // Uniform in [0,1) with 53 random bits; avoids distribution objects so
  // the mapping from engine output to draws is pinned down.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Standard normal via the trigonometric Box-Muller transform; pairs are
  // cached so each call consumes a fixed, reproducible number of uniforms.
  double gaussian() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1 = 1.0 - uniform01();  // (0,1]
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * std::numbers::pi * u2;
    cached_ = r * std::sin(a);
    has_cached_ = true;
    return r * std::cos(a);
  }

 private:
  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace uqsim
