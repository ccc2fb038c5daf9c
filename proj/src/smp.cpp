#include "cvcqd/smp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace cvcqd {

namespace {

constexpr double kSqrt2 = std::numbers::sqrt2;
constexpr double kTauFloor = 1e-9;

double ring_variance(const SmpParams& params, std::size_t hops, bool floor) {
  const double r = params.squeezing_r;
  GaussianState g = make_vacuum(2);
  g.two_mode_squeeze(0, 1, r);
  g.duplicate_mode(0);
  g.duplicate_mode(1);
  for (std::size_t h = 0; h < hops; ++h) {
    g.loss_channel(0, params.channel.eta, params.channel.epsilon);
    g.amplify(0, params.channel.gain(), params.channel.amp);
  }
  Eigen::VectorXd w = Eigen::VectorXd::Zero(8);
  w(0) = 1.0;
  w(2) = -1.0;
  w(4) = -1.0;
  w(6) = 1.0;
  double v = g.variance_of(w);
  if (floor) v += std::exp(-2.0 * r) / 2.0;
  return v;
}

struct RingSpec {
  std::vector<std::string> parties;
  std::vector<double> contributions;
  bool two_party = true;
};

SmpResult run_ring(const RingSpec& ring, const SmpParams& params, std::uint64_t seed,
                   AttackStrategy* eve, bool record, double key) {
  params.validate();
  const std::size_t n = ring.parties.size();
  const std::size_t n_hops = n + 1;

  SmpResult res;
  res.n_parties = n;
  res.key = key;
  res.debug_statistic = params.debug_statistic;
  res.tau_eq = params.tau_eq > 0.0 ? params.tau_eq : smp_tau_eq(params, n);
  res.transcript = Transcript(record);

  std::vector<std::string> names = ring.parties;
  names.insert(names.begin(), "charlie");
  Bus bus(res.transcript, names);
  if (eve != nullptr) bus.add_listener(eve);

  Rng physics(mix_seed(seed, Stream::Physics));
  Rng protocol(mix_seed(seed, Stream::Protocol));
  Rng schedule(mix_seed(seed, Stream::Schedule));

  const std::vector<std::size_t> counts(n_hops, params.decoys_per_hop);
  const std::vector<TimeFrame> frames =
      schedule_frames(counts, 1, mix_seed(seed, Stream::FrameOrder));

  auto hop_at = [&](std::size_t h) {
    const std::string from = h == 0 ? "charlie" : ring.parties[h - 1];
    const std::string to = h == n ? "charlie" : ring.parties[h];
    return Hop{h, from, to};
  };

  struct Slot {
    FramePulse pulse;
    BellOutcome reference;
    DisplacementSchedule sched;
  };
  std::vector<Slot> slots(frames.size());
  const double vr = params.schedule_variance;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    Slot& s = slots[i];
    s.sched.r_a = {schedule.normal(vr), schedule.normal(vr)};
    s.sched.r_b = {schedule.normal(vr), schedule.normal(vr)};
  }
  for (std::size_t i = 0; i < frames.size(); ++i) {
    Slot& s = slots[i];
    s.pulse.frame = frames[i];
    s.pulse.state = ShotState::vacuum(2, physics);
    s.pulse.state.two_mode_squeeze(0, 1, params.squeezing_r);
    s.reference = s.pulse.state.bell_combination(0, 1);
    s.pulse.state.displace(0, s.sched.r_b);  // travelling
    s.pulse.state.displace(1, s.sched.r_a);  // kept by Charlie
    bus.broadcast({"charlie", static_cast<std::int64_t>(i), BellReference{s.reference}});
  }

  // Charlie's closing combination with Charlie's own schedule removed.
  auto combine = [&](const Slot& s, Quadrature q, double t, double k) {
    if (q == Quadrature::X) {
      return (t - k) - kSqrt2 * s.reference.x_mu - (s.sched.r_b.x - s.sched.r_a.x);
    }
    return (t + k) - kSqrt2 * s.reference.p_mu - (s.sched.r_b.p + s.sched.r_a.p);
  };
  auto close = [&](Slot& s, Quadrature q) {
    const double t = s.pulse.state.homodyne(0, q);
    const double k = s.pulse.state.homodyne(1, q);
    return combine(s, q, t, k);
  };

  auto abort_at = [&](std::int64_t frame, std::size_t h) {
    res.status.aborted = true;
    res.status.reason = "decoy-fail";
    res.status.frame = frame;
    res.status.hop = static_cast<std::int64_t>(h);
    res.status.checkpoint = "hop-" + std::to_string(h);
    res.transcript.record(frame, "protocol", "abort", [&] { return res.status.to_json(); });
  };

  for (std::size_t h = 0; h < n_hops; ++h) {
    const Hop hop = hop_at(h);
    for (std::size_t i = 0; i < frames.size(); ++i) {
      const TimeFrame& f = frames[i];
      if (!f.is_message() && static_cast<std::size_t>(f.checkpoint) < h) continue;
      transfer(slots[i].pulse, 0, params.channel, hop, physics, eve);
      res.transcript.record(static_cast<std::int64_t>(i), "channel", "transfer",
                            [&] { return json{{"mode", 0}, {"hop", hop.name()}}; });
    }

    const double v_x = smp_decoy_variance(params, h);
    for (std::size_t i = 0; i < frames.size(); ++i) {
      const TimeFrame& f = frames[i];
      if (f.is_message() || static_cast<std::size_t>(f.checkpoint) != h) continue;
      const auto fi = static_cast<std::int64_t>(i);
      const Quadrature q = protocol.coin() ? Quadrature::X : Quadrature::P;
      bus.broadcast({"charlie", fi, QuadratureChoice{q}});
      Slot& s = slots[i];
      const double t = s.pulse.state.homodyne(0, q);
      if (hop.to != "charlie") bus.broadcast({hop.to, fi, MeasurementReport{q, {t}}});
      const double d = combine(s, q, t, s.pulse.state.homodyne(1, q));
      DecoyCheck check;
      check.frame = i;
      check.checkpoint = static_cast<int>(h);
      check.quadrature = q;
      check.statistic = d;
      check.threshold = params.threshold_c * std::sqrt(v_x);
      check.pass = std::abs(d) <= check.threshold;
      bus.broadcast({"charlie", fi, DecoyVerdict{check.pass, d, check.threshold}});
      res.decoys.push_back(check);
      if (!check.pass && params.enforce_abort) {
        abort_at(fi, h);
        res.verdict = SmpVerdict::None;
        res.statistic = std::numeric_limits<double>::quiet_NaN();
        return res;
      }
    }

    for (std::size_t i = 0; i < frames.size(); ++i) {
      if (!frames[i].is_message()) continue;
      Slot& s = slots[i];
      const auto fi = static_cast<std::int64_t>(i);
      if (h == 1 && params.malicious_intercept) {
        // Charlie pulls the mode off the Bob -> Alice hop and closes early.
        res.intercepted = close(s, Quadrature::X);
        res.verdict = SmpVerdict::None;
        res.statistic = std::numeric_limits<double>::quiet_NaN();
        res.transcript.record(fi, "charlie", "intercept", [] { return json::object(); });
        return res;
      }
      if (h < n) {
        const double c = ring.contributions[h];
        s.pulse.state.displace(0, {c, c});
        res.transcript.record(fi, ring.parties[h], "encode", [] { return json::object(); });
      } else {
        res.statistic = close(s, Quadrature::X);
      }
    }
  }

  const double x = res.statistic;
  const bool equal = std::abs(x) <= res.tau_eq;
  if (ring.two_party) {
    res.verdict = equal ? SmpVerdict::Equal : (x > 0.0 ? SmpVerdict::Greater : SmpVerdict::Less);
  } else {
    res.verdict = equal ? SmpVerdict::AllEqual : SmpVerdict::NotEqual;
  }
  VerdictAnnouncement ann{to_string(res.verdict), std::nullopt};
  if (params.debug_statistic) ann.statistic = x;
  bus.broadcast({"charlie", -1, ann});
  res.transcript.record(-1, "protocol", "status", [&] { return res.status.to_json(); });
  return res;
}

}  // namespace

const char* to_string(SmpVerdict v) {
  switch (v) {
    case SmpVerdict::Less: return "Less";
    case SmpVerdict::Equal: return "Equal";
    case SmpVerdict::Greater: return "Greater";
    case SmpVerdict::AllEqual: return "AllEqual";
    case SmpVerdict::NotEqual: return "NotEqual";
    case SmpVerdict::None: return "None";
  }
  return "None";
}

void SmpParams::validate() const {
  if (!(squeezing_r >= 0.0) || !std::isfinite(squeezing_r)) {
    throw std::invalid_argument("squeezing_r must be finite and >= 0");
  }
  channel.validate();
  if (!(threshold_c > 0.0)) throw std::invalid_argument("threshold_c must be > 0");
  if (!(schedule_variance >= 0.0)) throw std::invalid_argument("schedule_variance must be >= 0");
  if (!(hardening_key_variance >= 0.0)) {
    throw std::invalid_argument("hardening_key_variance must be >= 0");
  }
}

bool SmpResult::detected() const {
  if (status.aborted) return true;
  return std::any_of(decoys.begin(), decoys.end(), [](const DecoyCheck& d) { return !d.pass; });
}

json SmpResult::verdict_record() const {
  json out;
  out["verdict"] = to_string(verdict);
  out["statistic"] = debug_statistic && std::isfinite(statistic) ? json(statistic) : json(nullptr);
  out["aborted"] = status.aborted;
  out["hop"] = status.hop >= 0 ? json(status.hop) : json(nullptr);
  return out;
}

double smp_residual_variance(const SmpParams& params, std::size_t n_parties) {
  return ring_variance(params, n_parties + 1, false);
}

double smp_tau_eq(const SmpParams& params, std::size_t n_parties) {
  return std::max(4.0 * std::sqrt(smp_residual_variance(params, n_parties)), kTauFloor);
}

double smp_decoy_variance(const SmpParams& params, std::size_t hop) {
  return ring_variance(params, hop + 1, true);
}

double smp_hardening_key(Rng& key_stream, double variance) {
  if (variance <= 0.0) return 0.0;
  return key_stream.normal(variance);
}

SmpResult run_smp2(double x_a, double x_b, const SmpParams& params, std::uint64_t seed,
                   AttackStrategy* eve, bool record_transcript) {
  double key = 0.0;
  if (params.hardening_key) {
    key = *params.hardening_key;
  } else {
    Rng key_rng(mix_seed(seed, Stream::Key));
    key = smp_hardening_key(key_rng, params.hardening_key_variance);
  }
  RingSpec ring{{"bob", "alice"}, {x_b + key, -x_a - key}, true};
  return run_ring(ring, params, seed, eve, record_transcript, key);
}

SmpResult run_smp_n(const std::vector<double>& wealth, const SmpParams& params,
                    std::uint64_t seed, AttackStrategy* eve, bool record_transcript) {
  const std::size_t n = wealth.size();
  if (n < 2) throw std::invalid_argument("a comparison needs at least two parties");
  RingSpec ring;
  ring.two_party = false;
  for (std::size_t i = 0; i < n; ++i) {
    ring.parties.push_back("p" + std::to_string(i + 1));
    ring.contributions.push_back(i + 1 < n ? wealth[i]
                                           : -static_cast<double>(n - 1) * wealth[i]);
  }
  return run_ring(ring, params, seed, eve, record_transcript, 0.0);
}

}  // namespace cvcqd
