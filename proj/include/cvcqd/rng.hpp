#pragma once

#include <cstdint>
#include <random>

namespace cvcqd {

// Independent random streams derived from one run seed. Every consumer of
// randomness draws from its own stream so that changing one subsystem (an
// attack, the reveal level) never perturbs the draws of another.
enum class Stream : std::uint64_t {
  Physics = 1,   // vacuum samples, channel and amplifier noise
  Protocol = 2,  // public coins
  Schedule = 3,  // Charlie's R_A / R_B
  Messages = 4,  // message and wealth generators
  Eve = 5,       // attack strategy choices
  Reveal = 6,    // switch blurring noise
  FrameOrder = 7,
  Alice = 8,     // Alice's private decoy displacements
  Key = 9,       // pre-shared hardening key
};

// splitmix64 finaliser; used to derive child seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);
inline std::uint64_t mix_seed(std::uint64_t seed, Stream s) {
  return mix_seed(seed, static_cast<std::uint64_t>(s));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  // Zero-mean normal draw with the given variance.
  double normal(double variance = 1.0);
  double uniform();  // [0, 1)
  bool coin() { return uniform() < 0.5; }

  std::uint64_t seed() const { return seed_; }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> gauss_{0.0, 1.0};
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
};

}  // namespace cvcqd
