#pragma once

#include <cmath>
#include <cstdint>

namespace vic {

// All randomness in the project flows through these generators rather than
// <random> distributions, so that streams are reproducible across standard
// libraries and platforms.

inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Stateful stream generator.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() { return splitmix64(state_); }

  // Uniform in [0, 1).
  double next_double() {
    return double(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n), n > 0. Multiply-shift; bias is < 2^-64.
  uint64_t below(uint64_t n) {
    return uint64_t((__uint128_t(next_u64()) * n) >> 64);
  }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Standard normal via Box-Muller (own implementation for determinism).
  double normal() {
    double u1 = next_double(), u2 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

 private:
  uint64_t state_;
};

// Stateless counter-based stream: value depends only on (key, index).
// Used for the quantization noise so that training is reproducible no
// matter how batches are assembled.
inline uint64_t counter_hash(uint64_t key, uint64_t index) {
  uint64_t s = key ^ (0x9e3779b97f4a7c15ULL * (index + 1));
  return splitmix64(s);
}

// Key for one tensor's noise at one training step.
inline uint64_t noise_key(uint64_t seed, uint64_t step, uint64_t tensor_id) {
  uint64_t s = seed;
  s = splitmix64(s) ^ (step * 0xd1342543de82ef95ULL);
  s = splitmix64(s) ^ (tensor_id * 0xaf251af3b0f025b5ULL);
  return splitmix64(s);
}

// Uniform in [-1/2, 1/2).
inline double counter_uniform_centered(uint64_t key, uint64_t index) {
  return double(counter_hash(key, index) >> 11) * 0x1.0p-53 - 0.5;
}

}  // namespace vic
