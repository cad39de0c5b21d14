#pragma once

#include <cmath>
#include <cstdint>
#include <cstddef>

namespace pase {

/// Deterministic RNG with explicit stream forking. All randomness in the
/// project flows through this type so that runs are reproducible bit-for-bit
/// across platforms; no std::*_distribution is used anywhere (their output is
/// implementation-defined).
///
/// Core generator is xoshiro256**; streams are derived with splitmix64.
class Rng {
 public:
  explicit Rng(uint64_t seed) {
    uint64_t s = seed;
    for (auto& w : state_) w = splitmix64(s);
  }

  /// Derive an independent stream. Used to give every purpose (init, batch
  /// sampling at step k, mask draws per anchor, ...) its own generator, which
  /// keeps training resumable: the stream for step k does not depend on how
  /// many draws earlier steps consumed.
  Rng fork(uint64_t a, uint64_t b = 0, uint64_t c = 0) const {
    uint64_t h = state_[0];
    h = mix(h, 0x9e3779b97f4a7c15ull ^ a);
    h = mix(h, 0xbf58476d1ce4e5b9ull ^ b);
    h = mix(h, 0x94d049bb133111ebull ^ c);
    return Rng(h);
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (two uniforms per call, no cached spare).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
  }

  /// Unbiased index in [0, n) via Lemire's multiply-shift with rejection.
  size_t index(size_t n) {
    const uint64_t range = n;
    uint64_t x = next_u64();
    __uint128_t m = static_cast<__uint128_t>(x) * range;
    uint64_t lo = static_cast<uint64_t>(m);
    if (lo < range) {
      const uint64_t threshold = (0 - range) % range;
      while (lo < threshold) {
        x = next_u64();
        m = static_cast<__uint128_t>(x) * range;
        lo = static_cast<uint64_t>(m);
      }
    }
    return static_cast<size_t>(m >> 64);
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  static uint64_t splitmix64(uint64_t& s) {
    uint64_t z = (s += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  static uint64_t mix(uint64_t h, uint64_t v) {
    h ^= v;
    h *= 0xff51afd7ed558ccdull;
    h ^= h >> 33;
    return h;
  }

  uint64_t state_[4];
};

}  // namespace pase
