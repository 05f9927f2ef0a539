#pragma once

#include <complex>
#include <cstdint>
#include <random>

namespace mtcad {

// Seed derivation for independent streams: one SplitMix64 round over
// (master, stream). Used everywhere a master seed fans out to per-scenario
// or per-sample seeds, so the split is reproducible and documented:
//   seed_i = splitmix64(master + GOLDEN * (stream + 1))
uint64_t split_seed(uint64_t master, uint64_t stream);

// Deterministic draws on top of std::mt19937_64. Distributions are
// implemented here (not via std::*_distribution) so that byte streams are
// identical across standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // [0, 1), 53-bit resolution
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // standard normal via Box-Muller, pairs cached
  double normal();

  // CN(0,1): real and imaginary parts each N(0, 1/2)
  std::complex<double> cnormal();

  bool bernoulli(double p) { return uniform() < p; }

  // uniform integer in [0, n)
  int uniform_int(int n);

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace mtcad
