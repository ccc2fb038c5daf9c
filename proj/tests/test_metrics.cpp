#include <cmath>
#include <numbers>
#include <vector>

#include "cvcqd/metrics.hpp"
#include "doctest.h"

using namespace cvcqd;
using doctest::Approx;

namespace {

double capacity_oracle(double r, double sigma) {
  const double n = sigma * sigma + std::sinh(r) * std::sinh(r);
  return std::log(1.0 + n + n * n);
}

std::vector<double> gaussian(Rng& rng, std::size_t n, double var) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal(var);
  return v;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("dense coding capacity examples") {
  CHECK(dense_coding_capacity_nats({0.0, 0.0}) == 0.0);
  CHECK(dense_coding_capacity_nats({0.0, 1.0}) == Approx(std::log(3.0)).epsilon(1e-12));
  CHECK(dense_coding_capacity_nats({std::asinh(1.0), 0.0}) ==
        Approx(std::log(3.0)).epsilon(1e-12));
  const CapacityParams p{1.0, std::sqrt(std::exp(-2.0) / 4.0)};
  CHECK(p.nbar() == Approx(1.4149316663509686).epsilon(1e-12));
  CHECK(dense_coding_capacity_nats(p) == Approx(1.485452420783083).epsilon(1e-12));
  CHECK(capacity_from_nbar_nats(2.0) == Approx(std::log(7.0)));
  CHECK_THROWS_AS(dense_coding_capacity_nats({-1.0, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(capacity_from_nbar_nats(-0.1), std::invalid_argument);
}

TEST_CASE("capacity grows with r and with sigma") {
  for (double sigma : {0.0, 0.5, 1.0}) {
    double prev = -1.0;
    for (int i = 0; i <= 20; ++i) {
      const double r = 0.1 * i;
      const double c = dense_coding_capacity_nats({r, sigma});
      CHECK(c == Approx(capacity_oracle(r, sigma)).epsilon(1e-12));
      CHECK(c > prev);
      prev = c;
    }
  }
  double prev = -1.0;
  for (double sigma : {0.0, 0.2, 0.4, 0.8}) {
    const double c = dense_coding_capacity_nats({0.7, sigma});
    CHECK(c > prev);
    prev = c;
  }
}

TEST_CASE("channel mutual information closed form") {
  MiParams p;
  p.sigma_a = 1.0;
  CHECK(mutual_information_ab_bits(p) == Approx(1.0));
  p.sigma_a = 0.0;
  CHECK(mutual_information_ab_bits(p) == 0.0);

  p.sigma_a = 0.5;
  p.sigma_b = 0.3;
  p.sigma_sc = 0.2;
  double prev = -1.0;
  for (double eta : {0.2, 0.5, 0.8, 1.0}) {
    p.eta = eta;
    const double v = mutual_information_ab_bits(p);
    CHECK(v == Approx(std::log2(1.0 + eta / (1.0 + eta * (p.sigma + p.gamma - 1.0)))));
    CHECK(v > prev);
    prev = v;
  }
  p.lambda = 2;
  CHECK(mutual_information_ab_bits(p) < prev);

  MiParams bad;
  bad.sigma = 0.0;
  bad.sigma_a = 1.0;
  CHECK_THROWS_AS(mutual_information_ab_bits(bad), DomainError);
  bad.lambda = 3;
  CHECK_THROWS_AS(mutual_information_ab_bits(bad), std::invalid_argument);
}

TEST_CASE("wilson interval") {
  const Proportion half = wilson_interval(50, 100);
  CHECK(half.p == 0.5);
  CHECK(half.lo == Approx(0.4038).epsilon(1e-3));
  CHECK(half.hi == Approx(0.5962).epsilon(1e-3));
  const Proportion none = wilson_interval(0, 500);
  CHECK(none.lo == 0.0);
  CHECK(none.hi == Approx(3.8415 / (500 + 3.8415)).epsilon(1e-3));
  CHECK(wilson_interval(500, 500).hi == 1.0);
  CHECK_THROWS_AS(wilson_interval(1, 0), std::invalid_argument);
  CHECK_THROWS_AS(wilson_interval(3, 2), std::invalid_argument);
}

TEST_CASE("empirical mutual information") {
  Rng rng(77);
  const std::size_t n = 100000;
  const auto s = gaussian(rng, n, 1.0);

  CHECK(empirical_mi(s, gaussian(rng, n, 1.0)).bits <= 0.02);

  for (double snr : {0.1, 1.0, 10.0}) {
    std::vector<double> obs(n);
    for (std::size_t i = 0; i < n; ++i) obs[i] = s[i] + rng.normal(1.0 / snr);
    const double expect = 0.5 * std::log2(1.0 + snr);
    INFO("snr " << snr);
    CHECK(std::abs(empirical_mi(s, obs).bits / expect - 1.0) <= 0.1);
  }

  const MiEstimate sat = empirical_mi(s, s);
  CHECK(sat.saturated);
  CHECK(sat.bits == kMiCeilingBits);

  CHECK_THROWS_AS(empirical_mi(std::vector<double>(n, 1.0), s), DomainError);
  CHECK_THROWS_AS(empirical_mi(std::vector<double>(9999, 0.0), std::vector<double>(9999, 0.0)),
                  std::invalid_argument);
}

TEST_CASE("detection probability") {
  const Proportion p = detection_probability([](std::size_t t) { return t % 4 == 0; }, 200);
  CHECK(p.successes == 50);
  CHECK(p.p == 0.25);
  CHECK_THROWS_AS(detection_probability([](std::size_t) { return true; }, 99),
                  std::invalid_argument);
}

TEST_CASE("switch curve: blurring the reveal trades accuracy away") {
  CqdParams base;
  base.decoys = {0, 0, 0};
  base.messages.variance = 1.0;
  const auto curve = switch_curve(base, {0.0, 0.5, 1.0}, 10000, 9);
  REQUIRE(curve.size() == 3);
  CHECK(curve[0].mse >= curve[1].mse);
  CHECK(curve[1].mse >= curve[2].mse);
  CHECK(std::abs(curve[0].mse / (2.0 * base.schedule_variance) - 1.0) <= 0.1);
  CHECK(curve[2].mse <= 1e-12);
  CHECK(curve[0].mi.bits <= curve[1].mi.bits);
  CHECK(curve[2].mi.saturated);
}

}  // TEST_SUITE
