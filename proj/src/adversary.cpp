#include "cvcqd/adversary.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace cvcqd {

const char* to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::None: return "none";
    case AttackKind::PassiveListen: return "passive-listen";
    case AttackKind::Disturbance: return "disturbance";
    case AttackKind::InterceptResend: return "intercept-resend";
    case AttackKind::BeamSplitter: return "beam-splitter";
    case AttackKind::CloneNoise: return "clone-noise";
  }
  return "none";
}

AttackKind parse_attack_kind(const std::string& name) {
  for (AttackKind k : {AttackKind::None, AttackKind::PassiveListen, AttackKind::Disturbance,
                       AttackKind::InterceptResend, AttackKind::BeamSplitter,
                       AttackKind::CloneNoise}) {
    if (name == to_string(k)) return k;
  }
  throw std::invalid_argument("unknown attack kind '" + name + "'");
}

const std::vector<AttackKind>& attack_catalog() {
  static const std::vector<AttackKind> kinds = {
      AttackKind::PassiveListen, AttackKind::Disturbance, AttackKind::InterceptResend,
      AttackKind::BeamSplitter, AttackKind::CloneNoise};
  return kinds;
}

void AttackSpec::validate() const {
  for (double b : betas) {
    if (!(b >= 0.0 && b <= 1.0)) throw std::invalid_argument("beam splitter betas must lie in [0, 1]");
  }
  if (!(delta >= 0.0)) throw std::invalid_argument("clone noise delta must be >= 0");
  if (!std::isfinite(d)) throw std::invalid_argument("disturbance magnitude must be finite");
}

double AttackSpec::disturbance_magnitude(double squeezing_r) const {
  if (d >= 0.0) return d;
  return 5.0 * std::sqrt(std::exp(-2.0 * squeezing_r) / 2.0);
}

std::vector<double> EveLog::features(std::int64_t frame, bool include_broadcasts) const {
  std::vector<double> out;
  for (const auto& r : records) {
    if (r.frame == frame) out.push_back(r.value);
  }
  if (!include_broadcasts) return out;
  for (const auto& msg : broadcasts) {
    if (msg.frame != frame) continue;
    if (const auto* ref = std::get_if<BellReference>(&msg.payload)) {
      out.push_back(ref->value.x_mu);
      out.push_back(ref->value.p_mu);
    } else if (const auto* fin = std::get_if<FinalAnnouncement>(&msg.payload)) {
      out.push_back(fin->x);
      out.push_back(fin->p);
    } else if (const auto* rev = std::get_if<ControlReveal>(&msg.payload)) {
      out.insert(out.end(), {rev->r_a.x, rev->r_a.p, rev->r_b.x, rev->r_b.p});
    }
  }
  return out;
}

std::string EveLog::to_jsonl(std::optional<std::size_t> trial) const {
  std::string out;
  auto emit = [&](json line) {
    if (trial) line["trial"] = *trial;
    out += line.dump() + "\n";
  };
  for (const auto& r : records) {
    emit({{"kind", "record"}, {"frame", r.frame}, {"hop", r.hop}, {"label", r.label},
          {"value", r.value}});
  }
  for (const auto& m : broadcasts) {
    emit({{"kind", "broadcast"}, {"frame", m.frame}, {"sender", m.sender},
          {"type", payload_kind(m.payload)}, {"payload", payload_json(m.payload)}});
  }
  return out;
}

// ---------------------------------------------------------------------------

void disturbance_tap(FramePulse& pulse, std::size_t mode, double d, Rng& eve) {
  const double theta = 2.0 * std::numbers::pi * eve.uniform();
  pulse.state.displace(mode, {d * std::cos(theta), d * std::sin(theta)});
}

InterceptModes intercept_resend_tap(FramePulse& pulse, std::size_t mode, BellOutcome reference,
                                    double r, Rng& physics) {
  ShotState& s = pulse.state;
  const std::size_t sent = s.add_vacuum_mode(physics);
  const std::size_t kept = s.add_vacuum_mode(physics);
  s.two_mode_squeeze(sent, kept, r);
  const double shift_x = reference.x_mu / std::numbers::sqrt2;
  const double shift_p = reference.p_mu / std::numbers::sqrt2;
  s.displace(sent, {shift_x, shift_p});
  s.displace(kept, {-shift_x, shift_p});
  // The receiver's slot now holds Eve's half; Eve holds the original.
  s.swap_modes(mode, sent);
  return {kept, sent};
}

namespace {

std::size_t coupled_stage(FramePulse& pulse, std::size_t mode, double beta, Rng& physics,
                          Quad* injected) {
  const std::size_t e = pulse.state.add_vacuum_mode(physics);
  if (injected != nullptr) *injected = pulse.state.quad(e);
  pulse.state.beam_split(mode, e, beta, BeamSplitterForm::Printed);
  return e;
}

}  // namespace

std::size_t beam_splitter_stage(FramePulse& pulse, std::size_t mode, double beta, Rng& physics) {
  return coupled_stage(pulse, mode, beta, physics, nullptr);
}

Quad beam_splitter_readout(FramePulse& pulse, std::size_t e21, std::size_t e22, double beta3) {
  // First output is e32, second e31.
  pulse.state.beam_split(e22, e21, beta3, BeamSplitterForm::Printed);
  const double x_e32 = pulse.state.homodyne(e22, Quadrature::X);
  const double p_e31 = pulse.state.homodyne(e21, Quadrature::P);
  return {x_e32, p_e31};
}

std::size_t clone_noise_tap(FramePulse& pulse, std::size_t mode, double delta, Rng& physics) {
  if (!(delta >= 0.0)) throw std::invalid_argument("clone noise delta must be >= 0");
  const std::size_t copy = pulse.state.add_mode(pulse.state.quad(mode));
  pulse.state.add_noise(mode, delta, physics);
  pulse.state.add_noise(copy, delta, physics);
  return copy;
}

// ---------------------------------------------------------------------------

AttackStrategy::AttackStrategy(AttackSpec spec, PublicParams pub, std::uint64_t seed)
    : spec_(std::move(spec)), pub_(pub), rng_(seed) {
  spec_.validate();
  hops_ = spec_.hops;
  if (hops_.empty()) {
    switch (spec_.kind) {
      case AttackKind::Disturbance:
      case AttackKind::InterceptResend:
      case AttackKind::CloneNoise: hops_ = {0}; break;
      case AttackKind::BeamSplitter: hops_ = {0, pub_.second_hop}; break;
      case AttackKind::None:
      case AttackKind::PassiveListen: break;
    }
  }
  if (spec_.kind == AttackKind::BeamSplitter && hops_.size() != 2) {
    throw std::invalid_argument("beam-splitter attack needs exactly two target hops");
  }
}

bool AttackStrategy::targets(std::size_t hop) const {
  return std::find(hops_.begin(), hops_.end(), hop) != hops_.end();
}

void AttackStrategy::record(std::int64_t frame, std::size_t hop, std::string label, double value) {
  log_.records.push_back({frame, hop, std::move(label), value});
}

void AttackStrategy::on_public(const ClassicalMsg& msg) {
  log_.broadcasts.push_back(msg);
  if (const auto* ref = std::get_if<BellReference>(&msg.payload)) {
    references_[msg.frame] = ref->value;
  }
}

void AttackStrategy::on_transfer(FramePulse& pulse, std::size_t mode, const Hop& hop,
                                 Rng& physics) {
  if (!targets(hop.index)) return;
  const auto frame = static_cast<std::int64_t>(pulse.frame.index);
  switch (spec_.kind) {
    case AttackKind::None:
    case AttackKind::PassiveListen: return;

    case AttackKind::Disturbance:
      disturbance_tap(pulse, mode, spec_.disturbance_magnitude(pub_.squeezing_r), rng_);
      return;

    case AttackKind::InterceptResend: {
      const auto it = references_.find(frame);
      const BellOutcome ref = it == references_.end() ? BellOutcome{} : it->second;
      const InterceptModes m = intercept_resend_tap(pulse, mode, ref, pub_.squeezing_r, physics);
      record(frame, hop.index, "retained_x", pulse.state.homodyne(m.retained, Quadrature::X));
      record(frame, hop.index, "intercepted_x",
             pulse.state.homodyne(m.intercepted, Quadrature::X));
      return;
    }

    case AttackKind::BeamSplitter: {
      Quad injected;
      if (hop.index == hops_[0]) {
        const std::size_t e21 = coupled_stage(pulse, mode, spec_.betas[0], physics, &injected);
        stored_e21_[frame] = e21;
        instrumentation_.push_back({frame, hop.index, "e11_x", injected.x});
        instrumentation_.push_back({frame, hop.index, "e11_p", injected.p});
      } else if (hop.index == hops_[1]) {
        const auto it = stored_e21_.find(frame);
        const std::size_t e22 = coupled_stage(pulse, mode, spec_.betas[1], physics, &injected);
        instrumentation_.push_back({frame, hop.index, "e12_x", injected.x});
        instrumentation_.push_back({frame, hop.index, "e12_p", injected.p});
        if (it == stored_e21_.end()) return;
        const Quad out = beam_splitter_readout(pulse, it->second, e22, spec_.betas[2]);
        stored_e21_.erase(it);
        record(frame, hop.index, "x_e32", out.x);
        record(frame, hop.index, "p_e31", out.p);
      }
      return;
    }

    case AttackKind::CloneNoise: {
      const std::size_t copy = clone_noise_tap(pulse, mode, spec_.delta, physics);
      record(frame, hop.index, "clone_x", pulse.state.homodyne(copy, Quadrature::X));
      return;
    }
  }
}

}  // namespace cvcqd
