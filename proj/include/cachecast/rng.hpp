#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "cachecast/hash.hpp"

namespace cachecast {

// Seeded deterministic generator (SplitMix64 core). We roll our own instead
// of using <random> engines/distributions because their output is
// implementation-defined and every simulation result in this project must be
// reproducible from a seed alone.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + uniform01() * (hi - lo); }

  // Unbiased integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n) {
    unsigned __int128 wide =
        static_cast<unsigned __int128>(next_u64()) * static_cast<unsigned __int128>(n);
    return static_cast<std::uint64_t>(wide >> 64);
  }

  bool bernoulli(double p) { return uniform01() < p; }

  // Box-Muller without spare caching: always consumes exactly two uniforms.
  double normal() {
    double u1 = 1.0 - uniform01();  // (0, 1]
    double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  double lognormal(double mu, double sigma) {
    return std::exp(mu + sigma * normal());
  }

  // Exact Poisson sampling. Knuth's product method for small means; larger
  // means are split in halves (Poisson additivity) so exp(-lambda) stays
  // representable.
  std::uint64_t poisson(double lambda) {
    std::uint64_t total = 0;
    while (lambda > 30.0) {
      double half = lambda * 0.5;
      total += poisson_knuth(half);
      lambda -= half;
    }
    return total + poisson_knuth(lambda);
  }

 private:
  std::uint64_t poisson_knuth(double lambda) {
    if (lambda <= 0.0) return 0;
    const double limit = std::exp(-lambda);
    std::uint64_t k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform01();
    } while (p > limit);
    return k - 1;
  }

  std::uint64_t state_;
};

// Derives an independent stream seed from a base seed and stream tags.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag_a,
                                 std::uint64_t tag_b = 0) {
  return hash_combine(hash_combine(base, tag_a), tag_b);
}

}  // namespace cachecast
