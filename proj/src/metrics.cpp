#include "cvcqd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace cvcqd {

double CapacityParams::nbar() const {
  const double s = std::sinh(r);
  return sigma * sigma + s * s;
}

double capacity_from_nbar_nats(double nbar) {
  if (!(nbar >= 0.0)) throw std::invalid_argument("nbar must be >= 0");
  return std::log(1.0 + nbar + nbar * nbar);
}

double dense_coding_capacity_nats(const CapacityParams& params) {
  if (!(params.r >= 0.0) || !(params.sigma >= 0.0)) {
    throw std::invalid_argument("capacity needs r >= 0 and sigma >= 0");
  }
  return capacity_from_nbar_nats(params.nbar());
}

void MiParams::validate() const {
  if (lambda != 1 && lambda != 2) throw std::invalid_argument("lambda must be 1 or 2");
  for (double v : {eta, epsilon, sigma, gamma, sigma_a, sigma_b, sigma_sc}) {
    if (!(v >= 0.0)) throw std::invalid_argument("mutual information parameters must be >= 0");
  }
}

double mutual_information_ab_bits(const MiParams& params) {
  params.validate();
  const double denom = params.lambda + params.eta * (params.sigma + params.gamma - 1.0);
  if (!(denom > 0.0)) {
    throw DomainError("mutual information denominator lambda + eta*(sigma + gamma - 1) = " +
                      std::to_string(denom) + " is not positive");
  }
  return std::log2(1.0 + params.eta * params.sigma_abc() / denom);
}

Proportion wilson_interval(std::size_t successes, std::size_t trials) {
  if (trials == 0) throw std::invalid_argument("proportion over zero trials");
  if (successes > trials) throw std::invalid_argument("more successes than trials");
  constexpr double z = 1.959963984540054;
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / (1.0 + z2 / n);
  // The bounds touch 0 and 1 exactly at the extremes; rounding would leave ~1e-19.
  const double lo = successes == 0 ? 0.0 : std::max(0.0, centre - half);
  const double hi = successes == trials ? 1.0 : std::min(1.0, centre + half);
  return {successes, trials, p, lo, hi};
}

MiEstimate empirical_mi(const std::vector<double>& secret,
                        const std::vector<std::vector<double>>& observations) {
  const std::size_t n = secret.size();
  if (observations.size() != n) {
    throw std::invalid_argument("secret and observation counts differ");
  }
  if (n < kMinMiSamples) {
    throw std::invalid_argument("empirical_mi needs at least " + std::to_string(kMinMiSamples) +
                                " samples, got " + std::to_string(n));
  }
  const std::size_t k = observations.front().size();
  Eigen::MatrixXd a(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k + 1));
  Eigen::VectorXd s(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    if (observations[i].size() != k) throw std::invalid_argument("ragged observation rows");
    const auto row = static_cast<Eigen::Index>(i);
    a(row, 0) = 1.0;
    for (std::size_t j = 0; j < k; ++j) {
      if (!std::isfinite(observations[i][j])) throw std::invalid_argument("non-finite observation");
      a(row, static_cast<Eigen::Index>(j + 1)) = observations[i][j];
    }
    if (!std::isfinite(secret[i])) throw std::invalid_argument("non-finite secret");
    s(row) = secret[i];
  }

  const double mean = s.mean();
  const double var_s = (s.array() - mean).square().mean();
  if (!(var_s > 1e-300)) throw DomainError("secret has zero variance");

  const Eigen::VectorXd beta = a.colPivHouseholderQr().solve(s);
  const Eigen::VectorXd res = s - a * beta;
  const double var_r = res.squaredNorm() / static_cast<double>(n);

  MiEstimate out;
  out.samples = n;
  const double floor = var_s * std::exp2(-2.0 * kMiCeilingBits);
  if (var_r <= floor) {
    out.bits = kMiCeilingBits;
    out.saturated = true;
    return out;
  }
  out.bits = std::max(0.0, 0.5 * std::log2(var_s / var_r));
  return out;
}

MiEstimate empirical_mi(const std::vector<double>& secret, const std::vector<double>& observation) {
  std::vector<std::vector<double>> rows(observation.size());
  for (std::size_t i = 0; i < observation.size(); ++i) rows[i] = {observation[i]};
  return empirical_mi(secret, rows);
}

Proportion detection_probability(const std::function<bool(std::size_t)>& detected,
                                 std::size_t trials) {
  if (trials < 100) throw std::invalid_argument("detection_probability needs >= 100 trials");
  std::size_t hits = 0;
  for (std::size_t t = 0; t < trials; ++t) hits += detected(t) ? 1 : 0;
  return wilson_interval(hits, trials);
}

Proportion detection_probability(const AttackSpec& attack, const CqdParams& params,
                                 std::size_t trials, std::uint64_t seed) {
  return detection_probability(
      [&](std::size_t t) {
        const std::uint64_t ts = mix_seed(seed, t);
        if (attack.kind == AttackKind::None) return run_cqd(params, ts, nullptr, false).detected();
        AttackStrategy eve(attack, {params.squeezing_r, 2}, mix_seed(ts, Stream::Eve));
        return run_cqd(params, ts, &eve, false).detected();
      },
      trials);
}

std::vector<SwitchPoint> switch_curve(const CqdParams& base, const std::vector<double>& kappas,
                                      std::size_t trials, std::uint64_t seed) {
  std::vector<SwitchPoint> out;
  for (double kappa : kappas) {
    CqdParams p = base;
    p.kappa = kappa;
    p.validate();
    std::vector<double> secret;
    std::vector<double> estimate;
    double sq = 0.0;
    std::size_t count = 0;
    for (std::size_t t = 0; t < trials; ++t) {
      const CqdRun run = run_cqd(p, mix_seed(seed, t), nullptr, false);
      for (const auto& m : run.messages) {
        const Quad e = m.decode.alice_error;
        sq += 0.5 * (e.x * e.x + e.p * e.p);
        ++count;
        secret.push_back(m.truth.alice.x);
        estimate.push_back(m.decode.alice_estimate.x);
      }
    }
    if (count == 0) throw InvariantViolation("switch curve produced no decoded messages");
    SwitchPoint pt;
    pt.kappa = kappa;
    pt.mse = sq / static_cast<double>(count);
    pt.mi = empirical_mi(secret, estimate);
    out.push_back(pt);
  }
  return out;
}

}  // namespace cvcqd
