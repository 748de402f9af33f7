#pragma once

#include <cmath>
#include <cstdint>

namespace easi {

// Counter-based RNG: splitmix64 streams derived from (seed, stream id).
// Every draw sequence is a pure function of (seed, stream), so generation
// is reproducible bit-for-bit regardless of thread count or platform.
class Rng {
public:
  Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : state_(mix(seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1)))) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix(state_);
  }

  // Uniform in (0, 1): never returns 0 or 1 exactly.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller; one value per call keeps the stream layout simple.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  // Index into a discrete distribution given cumulative weights.
  int categorical(const double* cum, int n) {
    double u = uniform();
    for (int k = 0; k < n; ++k) {
      if (u <= cum[k]) return k;
    }
    return n - 1;
  }

private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

}  // namespace easi
