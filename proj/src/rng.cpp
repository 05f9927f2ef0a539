#include "mtcad/rng.hpp"

#include <cmath>

namespace mtcad {

uint64_t split_seed(uint64_t master, uint64_t stream) {
  uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // 1-u keeps the log argument in (0,1]
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::complex<double> Rng::cnormal() {
  const double s = M_SQRT1_2;
  const double re = normal();
  const double im = normal();
  return {s * re, s * im};
}

int Rng::uniform_int(int n) {
  // rejection-free modulo bias is irrelevant for n << 2^64, but keep it exact
  const uint64_t bound = ~uint64_t{0} - (~uint64_t{0} % static_cast<uint64_t>(n));
  uint64_t x;
  do {
    x = next_u64();
  } while (x >= bound);
  return static_cast<int>(x % static_cast<uint64_t>(n));
}

}  // namespace mtcad
