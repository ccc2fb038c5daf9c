#pragma once

// Socialist-millionaire comparison on a ring. Charlie keeps one mode of each
// TMSV and sends the other around Charlie -> P1 -> ... -> Pn -> Charlie; each
// party displaces it by its contribution and Charlie closes with a Bell
// combination against the mode he kept.
//
// Two parties (P1 = Bob, P2 = Alice): X = x_B - x_A.
// n parties: X = sum_{i<n} x_i - (n-1) x_n.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cvcqd/adversary.hpp"
#include "cvcqd/channel.hpp"
#include "cvcqd/cqd.hpp"

namespace cvcqd {

enum class SmpVerdict { Less, Equal, Greater, AllEqual, NotEqual, None };

const char* to_string(SmpVerdict v);

struct SmpParams {
  double squeezing_r = 1.0;
  ChannelParams channel;
  std::size_t decoys_per_hop = 50;
  double threshold_c = 4.0;
  double schedule_variance = 25.0;
  double tau_eq = -1.0;  // < 0 selects 4 * sqrt(predicted residual variance)
  bool debug_statistic = false;
  bool enforce_abort = true;
  // Pre-shared key between Bob and Alice (two-party only). Bob adds +k,
  // Alice adds -k. `hardening_key` overrides the random draw.
  double hardening_key_variance = 0.0;
  std::optional<double> hardening_key;
  // Charlie measures the mode on the Bob -> Alice hop instead of forwarding.
  bool malicious_intercept = false;

  void validate() const;
};

struct SmpResult {
  std::size_t n_parties = 2;
  SmpVerdict verdict = SmpVerdict::None;
  double statistic = 0.0;
  double tau_eq = 0.0;
  bool debug_statistic = false;
  RunStatus status;
  std::vector<DecoyCheck> decoys;  // checkpoint = hop index
  std::optional<double> intercepted;
  double key = 0.0;
  Transcript transcript;

  bool detected() const;
  // {verdict, statistic_or_null, aborted, hop}
  json verdict_record() const;
};

// Variance of the closing statistic around its ideal value for a ring with
// `n_parties` parties (n + 1 hops).
double smp_residual_variance(const SmpParams& params, std::size_t n_parties);
double smp_tau_eq(const SmpParams& params, std::size_t n_parties);
// Honest decoy statistic variance for a decoy measured after hop `hop`.
double smp_decoy_variance(const SmpParams& params, std::size_t hop);

double smp_hardening_key(Rng& key_stream, double variance);

SmpResult run_smp2(double x_a, double x_b, const SmpParams& params, std::uint64_t seed,
                   AttackStrategy* eve = nullptr, bool record_transcript = true);
SmpResult run_smp_n(const std::vector<double>& wealth, const SmpParams& params,
                    std::uint64_t seed, AttackStrategy* eve = nullptr,
                    bool record_transcript = true);

}  // namespace cvcqd
