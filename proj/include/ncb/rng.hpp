#pragma once

#include <cmath>
#include <cstdint>

#include "ncb/base.hpp"

namespace ncb {

// Counter-based generator: every draw is a pure function of
// (seed, stream, counter). Samples are reproducible under any parallel
// schedule, which is what the deterministic-report requirement needs.
struct CounterRng {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t raw(std::uint64_t counter) const {
    return mix(mix(seed ^ 0x853c49e6748fea9bULL * stream) + counter);
  }

  // Uniform in (0,1); never returns exactly 0.
  double uniform(std::uint64_t counter) const {
    return (static_cast<double>(raw(counter) >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(std::uint64_t counter, double lo, double hi) const {
    return lo + (hi - lo) * uniform(counter);
  }

  // Standard normal via Box-Muller; consumes two sub-counters per value.
  double normal(std::uint64_t counter) const {
    const double u1 = uniform(2 * counter);
    const double u2 = uniform(2 * counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * pi * u2);
  }

  Vec3 normal3(std::uint64_t counter) const {
    return {normal(3 * counter), normal(3 * counter + 1), normal(3 * counter + 2)};
  }

  CounterRng fork(std::uint64_t substream) const {
    return CounterRng{seed, mix(stream ^ substream)};
  }
};

}  // namespace ncb
