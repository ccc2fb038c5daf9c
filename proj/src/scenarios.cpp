#include "cvcqd/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace cvcqd {

const char* to_string(CharlieScenario s) {
  switch (s) {
    case CharlieScenario::AuxModeSwap: return "aux-mode-swap";
    case CharlieScenario::SeparableState: return "separable-state";
    case CharlieScenario::PostHoc: return "post-hoc";
  }
  return "post-hoc";
}

CharlieScenario parse_charlie_scenario(const std::string& name) {
  for (auto s : {CharlieScenario::AuxModeSwap, CharlieScenario::SeparableState,
                 CharlieScenario::PostHoc}) {
    if (name == to_string(s)) return s;
  }
  throw std::invalid_argument("unknown charlie scenario '" + name + "'");
}

ScenarioReport malicious_charlie_scenario(const CqdParams& base, CharlieScenario scenario,
                                          std::size_t trials, std::uint64_t seed) {
  if (trials == 0) throw std::invalid_argument("scenario needs at least one trial");
  CqdParams p = base;
  switch (scenario) {
    case CharlieScenario::AuxModeSwap: p.charlie = CharlieBehavior::AuxModeSwap; break;
    case CharlieScenario::SeparableState: p.charlie = CharlieBehavior::SeparableState; break;
    case CharlieScenario::PostHoc: p.charlie = CharlieBehavior::Honest; break;
  }

  ScenarioReport rep;
  rep.scenario = scenario;
  rep.trials = trials;
  std::size_t hits = 0;
  std::vector<double> secret;
  std::vector<double> sums;
  for (std::size_t t = 0; t < trials; ++t) {
    const CqdRun run = run_cqd(p, mix_seed(seed, t), nullptr, false);
    if (run.detected()) {
      ++hits;
      if (run.status.aborted) ++rep.detected_at[run.status.checkpoint];
    }
    if (scenario != CharlieScenario::PostHoc) continue;
    for (const auto& m : run.messages) {
      const double sum = m.schedule.r_b.x - m.schedule.r_a.x - m.decode.X;
      rep.max_sum_error =
          std::max(rep.max_sum_error, std::abs(sum - (m.truth.alice.x + m.truth.bob.x)));
      secret.push_back(m.truth.alice.x);
      sums.push_back(sum);
    }
  }
  rep.detection = wilson_interval(hits, trials);
  rep.samples = secret.size();
  if (scenario == CharlieScenario::PostHoc) {
    const double va = p.messages.variance;
    const double vb = p.messages.bob_variance.value_or(va);
    rep.mi_alice_theory = vb > 0.0 ? 0.5 * std::log2(1.0 + va / vb) : kMiCeilingBits;
    if (rep.samples >= kMinMiSamples) rep.mi_alice = empirical_mi(secret, sums);
  }
  return rep;
}

}  // namespace cvcqd
