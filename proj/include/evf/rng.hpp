#pragma once

#include <cmath>
#include <cstdint>

namespace evf {

// splitmix64 generator. Self-contained so that streams are reproducible
// byte-for-byte across standard libraries; std::normal_distribution and
// friends are implementation-defined and would break golden datasets.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [lo, hi] inclusive, unbiased via rejection.
  int uniform_int(int lo, int hi) {
    uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return lo + static_cast<int>(x % span);
  }

  // Standard normal via Box-Muller; second value of each pair is cached.
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1, u2;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(theta);
    have_cached_ = true;
    return r * std::cos(theta);
  }

  // Independent stream derived from this seed; used to give every dataset
  // instance its own sub-seed so generation order never matters.
  static uint64_t derive(uint64_t seed, uint64_t stream) {
    Rng mix(seed ^ (0x9e3779b97f4a7c15ull * (stream + 1)));
    return mix.next_u64();
  }

 private:
  uint64_t state_;
  double cached_ = 0;
  bool have_cached_ = false;
};

}  // namespace evf
