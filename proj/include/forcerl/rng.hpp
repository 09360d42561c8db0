#pragma once

#include "forcerl/types.hpp"

#include <cstdint>
#include <random>

namespace forcerl {

// splitmix64 finalizer; used to derive statistically independent child seeds
// so that no two experiment cells or rollouts share a stream.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) {
  return mix64(master ^ mix64(a + 0x517cc1b727220a95ULL) ^ mix64(b + 0x2545f4914f6cdd1dULL));
}

class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : gen_(seed) {}

  double gaussian() { return normal_(gen_); }
  double gaussian(double mean, double stddev) { return mean + stddev * normal_(gen_); }
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(gen_);
  }
  Vec gaussian_vec(int n) {
    Vec v(n);
    for (int i = 0; i < n; ++i) v[i] = normal_(gen_);
    return v;
  }
  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace forcerl
