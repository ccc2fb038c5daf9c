#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "cvcqd/adversary.hpp"
#include "cvcqd/cqd.hpp"

namespace cvcqd {

struct CapacityParams {
  double r = 0.0;
  double sigma = 0.0;

  double nbar() const;  // sigma^2 + sinh^2 r
};

double capacity_from_nbar_nats(double nbar);
// ln(1 + n + n^2); throws std::invalid_argument for negative inputs.
double dense_coding_capacity_nats(const CapacityParams& params);

struct MiParams {
  double eta = 1.0;
  double epsilon = 0.0;  // carried for reporting; the closed form uses gamma
  int lambda = 1;        // 1 homodyne, 2 heterodyne
  double sigma = 1.0;
  double gamma = 0.0;
  double sigma_a = 0.0;
  double sigma_b = 0.0;
  double sigma_sc = 0.0;

  double sigma_abc() const { return sigma_a + sigma_b + sigma_sc; }
  void validate() const;
};

// log2(1 + eta*S / (lambda + eta*(sigma + gamma - 1))). DomainError when the
// denominator is not positive.
double mutual_information_ab_bits(const MiParams& params);

struct Proportion {
  std::size_t successes = 0;
  std::size_t trials = 0;
  double p = 0.0;
  double lo = 0.0;  // Wilson 95% interval
  double hi = 0.0;
};

Proportion wilson_interval(std::size_t successes, std::size_t trials);

inline constexpr double kMiCeilingBits = 32.0;
inline constexpr std::size_t kMinMiSamples = 10000;

struct MiEstimate {
  double bits = 0.0;
  bool saturated = false;  // residual vanished; bits pinned at kMiCeilingBits
  std::size_t samples = 0;
};

// Gaussian regression estimate 1/2 log2(Var(secret)/Var(residual)) where the
// residual comes from an OLS fit of the secret on the observation columns
// plus an intercept. `observations[i]` is the feature row of sample i.
MiEstimate empirical_mi(const std::vector<double>& secret,
                        const std::vector<std::vector<double>>& observations);
MiEstimate empirical_mi(const std::vector<double>& secret, const std::vector<double>& observation);

// Fraction of trials for which `detected(trial)` is true.
Proportion detection_probability(const std::function<bool(std::size_t)>& detected,
                                 std::size_t trials);
// CQD runs with the given attack; trial t uses seed mix_seed(seed, t).
Proportion detection_probability(const AttackSpec& attack, const CqdParams& params,
                                 std::size_t trials, std::uint64_t seed);

struct SwitchPoint {
  double kappa = 0.0;
  double mse = 0.0;  // Bob's estimate of Alice's message, averaged over x and p
  MiEstimate mi;     // between x_A and Bob's estimate of it
};

// Every kappa reuses the same trial seeds.
std::vector<SwitchPoint> switch_curve(const CqdParams& base, const std::vector<double>& kappas,
                                      std::size_t trials, std::uint64_t seed);

}  // namespace cvcqd
