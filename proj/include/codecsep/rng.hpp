#pragma once

#include <cmath>
#include <cstdint>

namespace codecsep {

// Portable deterministic PRNG. std::mt19937_64 itself is specified by the
// standard, but the <random> distributions are not, so we keep both the
// generator and the distribution math in-house.
//
// Stream generator: xorshift64* (update: x ^= x >> 12; x ^= x << 25;
// x ^= x >> 27; return x * 2685821657736338717).
// Seeding/hashing: splitmix64 over the seed words, so nearby seeds give
// unrelated streams.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(splitmix(seed ^ 0x9e3779b97f4a7c15ull)) {
    if (state_ == 0) state_ = 0x853c49e6748fea9bull;
  }

  // Derives an independent stream from (seed, a, b), e.g. per
  // (dataset seed, example, speaker).
  static Rng from_keys(uint64_t seed, uint64_t a, uint64_t b) {
    uint64_t h = splitmix(seed);
    h = splitmix(h ^ (a + 0x9e3779b97f4a7c15ull));
    h = splitmix(h ^ (b + 0xbf58476d1ce4e5b9ull));
    return Rng(h);
  }

  uint64_t next_u64() {
    uint64_t x = state_;
    x ^= x >> 12;
    x ^= x << 25;
    x ^= x >> 27;
    state_ = x;
    return x * 2685821657736338717ull;
  }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). n must be > 0.
  uint64_t below(uint64_t n) { return next_u64() % n; }

  int64_t range_int(int64_t lo, int64_t hi_inclusive) {
    return lo + static_cast<int64_t>(below(static_cast<uint64_t>(hi_inclusive - lo + 1)));
  }

  // Standard normal via Box-Muller (deterministic, no cached spare).
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

 private:
  static uint64_t splitmix(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  uint64_t state_;
};

}  // namespace codecsep
