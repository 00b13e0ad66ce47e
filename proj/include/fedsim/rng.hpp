#pragma once

#include <cstdint>
#include <cmath>

namespace fedsim {

// splitmix64 finalizer; used both as a stream generator and as a seed mixer.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Derives an independent child seed from a parent seed and a salt.
// Adding clients or rounds never perturbs sibling streams because each
// (parent, salt) pair maps to its own stream.
inline std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t salt) {
  return splitmix64(parent ^ splitmix64(salt ^ 0xD1B54A32D192ED03ULL));
}

// Deterministic RNG stream. All randomness in the simulator flows through
// this class so runs are reproducible bit-for-bit from a master seed,
// independent of the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(splitmix64(seed ^ 0x2545F4914F6CDD1DULL)) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t x = state_;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n) {
    // modulo bias is negligible for n << 2^64 and keeps the draw count fixed
    return next_u64() % n;
  }

  // Standard normal via Box-Muller (cosine branch only, fixed draw count).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    constexpr double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Child stream for a tagged sub-task (client id, round index, ...).
  Rng split(std::uint64_t salt) const { return Rng(derive_seed(state_, salt)); }

 private:
  std::uint64_t state_;
};

}  // namespace fedsim
