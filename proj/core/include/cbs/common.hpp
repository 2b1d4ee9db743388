#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace cbs {

// Probability clamp applied before every logit / odds computation.
inline constexpr double kProbEps = 1e-6;

// Domain bounds for the Bernoulli odds multiplier q.
inline constexpr double kThetaLo = 1e-6;
inline constexpr double kThetaHi = 1e6;

inline double clamp_prob(double p) {
  if (p < kProbEps) return kProbEps;
  if (p > 1.0 - kProbEps) return 1.0 - kProbEps;
  return p;
}

inline double logit(double p) {
  p = clamp_prob(p);
  return std::log(p / (1.0 - p));
}

inline double sigmoid(double x) {
  if (x >= 0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Configuration problems (bad keys, invalid parameter combinations). Exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Data problems (schema mismatches, parse failures, degenerate inputs). Exit code 3.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failures (singular systems, non-finite results). Exit code 4.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// splitmix64 step; used to derive independent substreams from a master seed.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t master, uint64_t index) {
  return splitmix64(splitmix64(master) ^ splitmix64(index + 0x51ed270b9f6c2f1dull));
}

inline uint64_t derive_seed(uint64_t master, uint64_t a, uint64_t b) {
  return derive_seed(derive_seed(master, a), b);
}

// Uniform double in [0,1) from a single hashed key; gives per-row substreams
// that are stable regardless of how many other rows were drawn.
inline double hashed_uniform(uint64_t seed, uint64_t key_a, uint64_t key_b) {
  const uint64_t h = derive_seed(seed, key_a, key_b);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

}  // namespace cbs
