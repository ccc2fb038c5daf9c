#include "cvcqd/cqd.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace cvcqd {

namespace {

constexpr double kSqrt2 = std::numbers::sqrt2;

json quad_json(const Quad& q) { return json::array({q.x, q.p}); }

double component(const Quad& q, Quadrature which) {
  return which == Quadrature::X ? q.x : q.p;
}

std::optional<Quad> find_reveal(const DecoyReveal& r, const std::string& name) {
  for (const auto& [key, value] : r.values) {
    if (key == name) return value;
  }
  return std::nullopt;
}

void encode_checked(FramePulse& pulse, std::size_t mode, Quad message, const char* who) {
  if (!pulse.frame.is_message()) {
    throw ProtocolOrderError(std::string(who) + " cannot encode on decoy frame " +
                             std::to_string(pulse.frame.index));
  }
  pulse.state.displace(mode, message);
}

}  // namespace

const char* to_string(ReferenceMode m) { return m == ReferenceMode::Shared ? "shared" : "fresh"; }

const char* to_string(CharlieBehavior b) {
  switch (b) {
    case CharlieBehavior::Honest: return "honest";
    case CharlieBehavior::AuxModeSwap: return "aux-mode-swap";
    case CharlieBehavior::SeparableState: return "separable-state";
  }
  return "honest";
}

double Quantizer::apply(double v) const {
  if (!enabled()) return v;
  const double levels = std::ldexp(1.0, static_cast<int>(bits));
  const double step = 2.0 * range / levels;
  double idx = std::floor((v + range) / step);
  idx = std::clamp(idx, 0.0, levels - 1.0);
  return -range + (idx + 0.5) * step;
}

void Quantizer::validate() const {
  if (bits > 32) throw std::invalid_argument("quantizer supports at most 32 bits");
  if (enabled() && !(range > 0.0)) throw std::invalid_argument("quantizer range must be > 0");
}

void CqdParams::validate() const {
  if (!(squeezing_r >= 0.0) || !std::isfinite(squeezing_r)) {
    throw std::invalid_argument("squeezing_r must be finite and >= 0");
  }
  channel.validate();
  if (n_message == 0) throw std::invalid_argument("n_message must be >= 1");
  if (!(threshold_c > 0.0)) throw std::invalid_argument("threshold_c must be > 0");
  if (!(schedule_variance >= 0.0)) throw std::invalid_argument("schedule_variance must be >= 0");
  if (!(kappa >= 0.0 && kappa <= 1.0)) throw std::invalid_argument("kappa must lie in [0, 1]");
  if (!(messages.variance >= 0.0) || !(messages.bob_variance.value_or(0.0) >= 0.0)) {
    throw std::invalid_argument("message variance must be >= 0");
  }
  if (!std::isfinite(offset_x) || !std::isfinite(offset_y)) {
    throw std::invalid_argument("charlie offsets must be finite");
  }
  messages.quantizer.validate();
}

bool CqdRun::detected() const {
  if (status.aborted) return true;
  return std::any_of(decoys.begin(), decoys.end(), [](const DecoyCheck& d) { return !d.pass; });
}

// ---------------------------------------------------------------------------

PreparedFrame charlie_prepare(const TimeFrame& frame, const CqdParams& params,
                              const DisplacementSchedule& schedule, Rng& physics) {
  const double r = params.squeezing_r;
  const Quad off0{params.offset_x, params.offset_x};
  const Quad off1{params.offset_y, params.offset_y};

  auto squeezed = [&](bool offsets) {
    ShotState s = ShotState::vacuum(2, physics);
    if (offsets) {
      s.displace(0, off0);
      s.displace(1, off1);
    }
    s.two_mode_squeeze(0, 1, r);
    return s;
  };

  PreparedFrame out;
  out.pulse.frame = frame;

  if (params.charlie == CharlieBehavior::SeparableState) {
    // Classically correlated product state with the marginals of a TMSV.
    const double v = std::sinh(r) * std::sinh(r) / 2.0;
    const Quad u{physics.normal(v), physics.normal(v)};
    ShotState s = ShotState::vacuum(2, physics);
    s.displace(0, off0 + u);
    s.displace(1, off1 + Quad{u.x, -u.p});
    out.reference = {(off0.x - off1.x) / kSqrt2, (off0.p + off1.p) / kSqrt2};
    out.pulse.state = std::move(s);
  } else if (params.reference == ReferenceMode::Shared) {
    out.pulse.state = squeezed(true);
    out.reference = out.pulse.state.bell_combination(0, 1);
  } else {
    const ShotState ref = squeezed(true);
    out.reference = ref.bell_combination(0, 1);
    out.pulse.state = squeezed(params.reapply_offsets);
  }

  if (params.charlie == CharlieBehavior::AuxModeSwap) {
    // Bob's slot gets half of an unrelated TMSV; Charlie keeps a11.
    ShotState& s = out.pulse.state;
    const std::size_t c1 = s.add_vacuum_mode(physics);
    const std::size_t c2 = s.add_vacuum_mode(physics);
    s.two_mode_squeeze(c1, c2, r);
    s.swap_modes(0, c1);
  }

  out.pulse.state.displace(0, schedule.r_b);
  out.pulse.state.displace(1, schedule.r_a);
  return out;
}

DecoyCheck verify_decoy(const TimeFrame& frame, Quadrature q, double first, double second,
                        const std::optional<DecoyReveal>& reveal, BellOutcome reference,
                        double v_pred, double c) {
  if (frame.is_message()) {
    throw ProtocolOrderError("frame " + std::to_string(frame.index) + " is not a decoy");
  }
  if (!reveal) {
    throw ProtocolOrderError("decoy frame " + std::to_string(frame.index) +
                             " verified before the reveal");
  }
  const auto r_a = find_reveal(*reveal, "R_A");
  const auto r_b = find_reveal(*reveal, "R_B");
  if (!r_a || !r_b) {
    throw ProtocolOrderError("decoy reveal for frame " + std::to_string(frame.index) +
                             " lacks R_A or R_B");
  }
  Quad shift = *r_a;
  if (frame.checkpoint == kDecoyABo) {
    const auto d_a = find_reveal(*reveal, "D_A");
    if (!d_a) {
      throw ProtocolOrderError("decoy-ABo frame " + std::to_string(frame.index) +
                               " verified without Alice's reveal");
    }
    shift = shift + *d_a;
  }

  DecoyCheck out;
  out.frame = frame.index;
  out.checkpoint = frame.checkpoint;
  out.quadrature = q;
  const double a = first - component(*r_b, q);
  const double b = second - component(shift, q);
  if (q == Quadrature::X) {
    out.statistic = (a - b) - kSqrt2 * reference.x_mu;
  } else {
    out.statistic = (a + b) - kSqrt2 * reference.p_mu;
  }
  out.threshold = c * std::sqrt(v_pred);
  out.pass = std::abs(out.statistic) <= out.threshold;
  return out;
}

double predicted_decoy_variance(const CqdParams& params, int checkpoint, Quadrature q) {
  const double r = params.squeezing_r;
  const bool shared = params.reference == ReferenceMode::Shared;
  GaussianState g = make_vacuum(shared ? 2 : 4);
  g.two_mode_squeeze(0, 1, r);
  if (shared) {
    g.duplicate_mode(0);
    g.duplicate_mode(1);
  } else {
    g.two_mode_squeeze(2, 3, r);
  }

  auto hop = [&](std::size_t mode) {
    g.loss_channel(mode, params.channel.eta, params.channel.epsilon);
    g.amplify(mode, params.channel.gain(), params.channel.amp);
  };
  hop(0);
  if (checkpoint >= kDecoyAB) hop(1);
  if (checkpoint >= kDecoyABo) hop(1);

  Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(2 * g.modes()));
  const int o = q == Quadrature::X ? 0 : 1;
  const double s = q == Quadrature::X ? -1.0 : 1.0;
  w(0 + o) = 1.0;
  w(2 + o) = s;
  w(4 + o) = -1.0;
  w(6 + o) = -s;
  double v = g.variance_of(w);
  // The squeezed term cancels in the realized statistic when the reference
  // shares the noise; keep it as the threshold floor.
  if (shared) v += std::exp(-2.0 * r) / 2.0;
  return v;
}

void alice_encode(FramePulse& pulse, std::size_t mode, Quad message) {
  encode_checked(pulse, mode, message, "alice");
}

void bob_encode(FramePulse& pulse, std::size_t mode, Quad message) {
  encode_checked(pulse, mode, message, "bob");
}

Quad decode_partner(double X, double P, const ControlReveal& reveal, Quad own) {
  return {reveal.r_b.x - reveal.r_a.x - own.x - X, P - reveal.r_b.p - reveal.r_a.p - own.p};
}

// ---------------------------------------------------------------------------

namespace {

const char* phase_name(CqdSession::Phase p) {
  using P = CqdSession::Phase;
  switch (p) {
    case P::Created: return "created";
    case P::Prepared: return "prepared";
    case P::AtBob: return "at-bob";
    case P::AtAlice: return "at-alice";
    case P::AliceEncoded: return "alice-encoded";
    case P::Delivered: return "delivered";
    case P::Announced: return "announced";
    case P::Revealed: return "revealed";
    case P::Decoded: return "decoded";
    case P::Aborted: return "aborted";
  }
  return "?";
}

}  // namespace

CqdSession::CqdSession(CqdParams params, std::uint64_t seed, AttackStrategy* eve,
                       bool record_transcript)
    : params_(std::move(params)),
      eve_(eve),
      physics_(mix_seed(seed, Stream::Physics)),
      protocol_(mix_seed(seed, Stream::Protocol)),
      schedule_rng_(mix_seed(seed, Stream::Schedule)),
      messages_rng_(mix_seed(seed, Stream::Messages)),
      reveal_rng_(mix_seed(seed, Stream::Reveal)),
      alice_rng_(mix_seed(seed, Stream::Alice)),
      frame_seed_(mix_seed(seed, Stream::FrameOrder)),
      result_{{}, {}, {}, {}, Transcript(record_transcript)},
      bus_(result_.transcript, {"charlie", "alice", "bob"}) {
  params_.validate();
  if (eve_ != nullptr) bus_.add_listener(eve_);
  for (int cp = 0; cp < 3; ++cp) {
    v_pred_[cp][0] = predicted_decoy_variance(params_, cp, Quadrature::X);
    v_pred_[cp][1] = predicted_decoy_variance(params_, cp, Quadrature::P);
  }
}

void CqdSession::expect(Phase p, const char* step) const {
  if (phase_ == p || phase_ == Phase::Aborted) return;
  throw ProtocolOrderError(std::string(step) + " called in phase " + phase_name(phase_) +
                           ", expected " + phase_name(p));
}

Hop CqdSession::hop(std::size_t index) const {
  static const char* names[3][2] = {{"charlie", "bob"}, {"charlie", "alice"}, {"alice", "bob"}};
  return {index, names[index][0], names[index][1]};
}

void CqdSession::move(Slot& s, std::size_t mode, std::size_t hop_index) {
  const Hop h = hop(hop_index);
  transfer(s.prep.pulse, mode, params_.channel, h, physics_, eve_);
  result_.transcript.record(static_cast<std::int64_t>(s.prep.pulse.frame.index), "channel",
                            "transfer", [&] { return json{{"mode", mode}, {"hop", h.name()}}; });
}

void CqdSession::prepare() {
  expect(Phase::Created, "prepare");
  frames_ = schedule_frames(params_.decoys, params_.n_message, frame_seed_);
  const double vr = params_.schedule_variance;
  const Quantizer& quant = params_.messages.quantizer;
  slots_.resize(frames_.size());
  for (std::size_t i = 0; i < frames_.size(); ++i) {
    Slot& s = slots_[i];
    s.schedule.r_a = {schedule_rng_.normal(vr), schedule_rng_.normal(vr)};
    s.schedule.r_b = {schedule_rng_.normal(vr), schedule_rng_.normal(vr)};
    if (frames_[i].is_message()) {
      if (params_.messages.fixed) {
        s.message = *params_.messages.fixed;
      } else {
        const double mv = params_.messages.variance;
        const double bv = params_.messages.bob_variance.value_or(mv);
        s.message.alice = {messages_rng_.normal(mv), messages_rng_.normal(mv)};
        s.message.bob = {messages_rng_.normal(bv), messages_rng_.normal(bv)};
      }
      for (Quad* q : {&s.message.alice, &s.message.bob}) {
        q->x = quant.apply(q->x);
        q->p = quant.apply(q->p);
      }
    }
  }
  for (std::size_t i = 0; i < frames_.size(); ++i) {
    Slot& s = slots_[i];
    s.prep = charlie_prepare(frames_[i], params_, s.schedule, physics_);
    if (params_.charlie == CharlieBehavior::AuxModeSwap) s.charlie_mode = 2;
    bus_.broadcast({"charlie", static_cast<std::int64_t>(i), BellReference{s.prep.reference}});
  }
  result_.frames = frames_;
  phase_ = Phase::Prepared;
}

bool CqdSession::judge(const DecoyCheck& check) {
  result_.decoys.push_back(check);
  result_.transcript.record(static_cast<std::int64_t>(check.frame), "bob", "decoy-verdict",
                            [&] { return json{{"pass", check.pass}}; });
  if (check.pass || !params_.enforce_abort) return true;
  result_.status.aborted = true;
  result_.status.reason = "decoy-fail";
  result_.status.frame = static_cast<std::int64_t>(check.frame);
  result_.status.hop = check.checkpoint;
  result_.status.checkpoint = cqd_role_name(frames_[check.frame]);
  result_.transcript.record(static_cast<std::int64_t>(check.frame), "protocol", "abort",
                            [&] { return result_.status.to_json(); });
  phase_ = Phase::Aborted;
  return false;
}

void CqdSession::run_checkpoint(int checkpoint) {
  for (std::size_t i = 0; i < frames_.size() && !halted(); ++i) {
    const TimeFrame& f = frames_[i];
    if (f.is_message() || f.checkpoint != checkpoint) continue;
    Slot& s = slots_[i];
    const auto fi = static_cast<std::int64_t>(i);
    const Quadrature q = protocol_.coin() ? Quadrature::X : Quadrature::P;
    bus_.broadcast({"bob", fi, QuadratureChoice{q}});

    if (checkpoint == kDecoyCB && params_.charlie != CharlieBehavior::Honest) {
      // The check is Charlie's own; a dishonest Charlie just declares it passed.
      bus_.broadcast({"charlie", fi, DecoyVerdict{true, 0.0, 0.0}});
      continue;
    }

    ShotState& st = s.prep.pulse.state;
    const double first = st.homodyne(0, q);
    double second = 0.0;
    DecoyReveal reveal{{{"R_A", s.schedule.r_a}, {"R_B", s.schedule.r_b}}};
    if (checkpoint == kDecoyCB) {
      second = st.homodyne(s.charlie_mode, q);
      bus_.broadcast({"charlie", fi, MeasurementReport{q, {second}}});
    } else if (checkpoint == kDecoyAB) {
      second = st.homodyne(1, q);
      bus_.broadcast({"alice", fi, MeasurementReport{q, {second}}});
    } else {
      second = st.homodyne(1, q);
      bus_.broadcast({"alice", fi, DecoyReveal{{{"D_A", s.decoy_a}}}});
      reveal.values.emplace_back("D_A", s.decoy_a);
    }
    result_.transcript.record(fi, "bob", "measure",
                              [&] { return json{{"quadrature", to_string(q)}, {"value", first}}; });
    bus_.broadcast({"charlie", fi, DecoyReveal{{reveal.values[0], reveal.values[1]}}});

    const double v = v_pred_[checkpoint][q == Quadrature::X ? 0 : 1];
    const DecoyCheck check = verify_decoy(f, q, first, second, reveal, s.prep.reference, v,
                                          params_.threshold_c);
    bus_.broadcast({"bob", fi, DecoyVerdict{check.pass, check.statistic, check.threshold}});
    judge(check);
  }
}

void CqdSession::send_to_bob() {
  expect(Phase::Prepared, "send_to_bob");
  if (halted()) return;
  for (auto& s : slots_) move(s, 0, 0);
  bus_.broadcast({"bob", -1, Receipt{slots_.size()}});
  run_checkpoint(kDecoyCB);
  if (!halted()) phase_ = Phase::AtBob;
}

void CqdSession::send_to_alice() {
  expect(Phase::AtBob, "send_to_alice");
  if (halted()) return;
  std::size_t sent = 0;
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    if (!frames_[i].is_message() && frames_[i].checkpoint == kDecoyCB) continue;
    move(slots_[i], 1, 1);
    ++sent;
  }
  bus_.broadcast({"alice", -1, Receipt{sent}});
  run_checkpoint(kDecoyAB);
  if (!halted()) phase_ = Phase::AtAlice;
}

void CqdSession::alice_encode_all() {
  expect(Phase::AtAlice, "alice_encode");
  if (halted()) return;
  const double vr = params_.schedule_variance;
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    Slot& s = slots_[i];
    if (frames_[i].is_message()) {
      alice_encode(s.prep.pulse, 1, s.message.alice);
      result_.transcript.record(static_cast<std::int64_t>(i), "alice", "encode",
                                [] { return json::object(); });
    } else if (frames_[i].checkpoint == kDecoyABo) {
      s.decoy_a = {alice_rng_.normal(vr), alice_rng_.normal(vr)};
      s.prep.pulse.state.displace(1, s.decoy_a);
    }
  }
  phase_ = Phase::AliceEncoded;
}

void CqdSession::forward_to_bob() {
  expect(Phase::AliceEncoded, "forward_to_bob");
  if (halted()) return;
  std::size_t sent = 0;
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    if (!frames_[i].is_message() && frames_[i].checkpoint != kDecoyABo) continue;
    move(slots_[i], 1, 2);
    ++sent;
  }
  bus_.broadcast({"bob", -1, Receipt{sent}});
  run_checkpoint(kDecoyABo);
  if (!halted()) phase_ = Phase::Delivered;
}

void CqdSession::bob_encode_and_announce() {
  expect(Phase::Delivered, "bob_encode_and_announce");
  if (halted()) return;
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    if (!frames_[i].is_message()) continue;
    Slot& s = slots_[i];
    bob_encode(s.prep.pulse, 1, s.message.bob);
    const BellOutcome mu1 = s.prep.pulse.state.bell_measure(0, 1);
    const FinalAnnouncement ann{kSqrt2 * (mu1.x_mu - s.prep.reference.x_mu),
                                kSqrt2 * (mu1.p_mu - s.prep.reference.p_mu)};
    announcements_[static_cast<std::int64_t>(i)] = ann;
    bus_.broadcast({"bob", static_cast<std::int64_t>(i), ann});
  }
  phase_ = Phase::Announced;
}

void CqdSession::charlie_reveal() {
  if (phase_ != Phase::Announced && phase_ != Phase::Aborted) {
    throw ProtocolOrderError(std::string("charlie_reveal called in phase ") + phase_name(phase_) +
                             ", Bob has not announced yet");
  }
  if (halted()) return;
  const double blur = std::sqrt((1.0 - params_.kappa) * params_.schedule_variance);
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    if (!frames_[i].is_message()) continue;
    Slot& s = slots_[i];
    // Always drawn, so runs at different kappa share the same noise.
    const double z[4] = {reveal_rng_.normal(), reveal_rng_.normal(), reveal_rng_.normal(),
                         reveal_rng_.normal()};
    ControlReveal rev{{s.schedule.r_a.x + blur * z[0], s.schedule.r_a.p + blur * z[1]},
                      {s.schedule.r_b.x + blur * z[2], s.schedule.r_b.p + blur * z[3]},
                      params_.kappa};
    s.reveal = rev;
    ClassicalMsg msg{"charlie", static_cast<std::int64_t>(i), rev};
    if (params_.reveal_public) {
      bus_.broadcast(std::move(msg));
    } else {
      bus_.send_private(std::move(msg), {"alice", "bob"});
    }
  }
  phase_ = Phase::Revealed;
}

void CqdSession::decode() {
  expect(Phase::Revealed, "decode");
  if (halted()) return;
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    if (!frames_[i].is_message()) continue;
    const Slot& s = slots_[i];
    const FinalAnnouncement& ann = announcements_.at(static_cast<std::int64_t>(i));
    MessageOutcome m;
    m.frame = i;
    m.truth = s.message;
    m.reference = s.prep.reference;
    m.schedule = s.schedule;
    m.decode.X = ann.x;
    m.decode.P = ann.p;
    m.decode.alice_estimate = decode_partner(ann.x, ann.p, *s.reveal, s.message.bob);
    m.decode.bob_estimate = decode_partner(ann.x, ann.p, *s.reveal, s.message.alice);
    m.decode.alice_error = m.decode.alice_estimate - s.message.alice;
    m.decode.bob_error = m.decode.bob_estimate - s.message.bob;
    result_.transcript.record(static_cast<std::int64_t>(i), "protocol", "decode", [&] {
      return json{{"X", ann.x},
                  {"P", ann.p},
                  {"alice_error", quad_json(m.decode.alice_error)},
                  {"bob_error", quad_json(m.decode.bob_error)}};
    });
    result_.messages.push_back(m);
  }
  phase_ = Phase::Decoded;
}

void CqdSession::run_all() {
  prepare();
  send_to_bob();
  send_to_alice();
  alice_encode_all();
  forward_to_bob();
  bob_encode_and_announce();
  charlie_reveal();
  decode();
  if (!result_.status.aborted) {
    result_.transcript.record(-1, "protocol", "status", [&] { return result_.status.to_json(); });
  }
}

CqdRun CqdSession::take_result() { return std::move(result_); }

CqdRun run_cqd(const CqdParams& params, std::uint64_t seed, AttackStrategy* eve,
               bool record_transcript) {
  CqdSession session(params, seed, eve, record_transcript);
  session.run_all();
  return session.take_result();
}

}  // namespace cvcqd
