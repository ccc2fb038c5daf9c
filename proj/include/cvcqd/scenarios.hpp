#pragma once

// Participant attacks by Charlie. Unlike the channel taps these use Charlie's
// own private schedule, so they live apart from the eavesdropper catalog.

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>

#include "cvcqd/cqd.hpp"
#include "cvcqd/metrics.hpp"

namespace cvcqd {

enum class CharlieScenario { AuxModeSwap, SeparableState, PostHoc };

const char* to_string(CharlieScenario s);
CharlieScenario parse_charlie_scenario(const std::string& name);

struct ScenarioReport {
  CharlieScenario scenario = CharlieScenario::PostHoc;
  std::size_t trials = 0;
  Proportion detection;
  std::map<std::string, std::size_t> detected_at;  // checkpoint name -> runs

  // Post-hoc: Charlie's x_A + x_B from x_RB - x_RA - X.
  std::size_t samples = 0;
  double max_sum_error = 0.0;
  MiEstimate mi_alice;           // MI(x_A ; Charlie's sum), when samples allow
  double mi_alice_theory = 0.0;  // 1/2 log2(1 + Var x_A / Var x_B)
};

// `base` supplies channel, squeezing, decoys and messages; trial t uses seed
// mix_seed(seed, t).
ScenarioReport malicious_charlie_scenario(const CqdParams& base, CharlieScenario scenario,
                                          std::size_t trials, std::uint64_t seed);

}  // namespace cvcqd
