#include "cvcqd/rng.hpp"

#include <cmath>

namespace cvcqd {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double Rng::normal(double variance) {
  const double z = gauss_(engine_);
  return variance == 1.0 ? z : z * std::sqrt(variance);
}

double Rng::uniform() { return unit_(engine_); }

}  // namespace cvcqd
