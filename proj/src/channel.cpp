#include "cvcqd/channel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cvcqd {

std::string cqd_role_name(const TimeFrame& frame) {
  if (frame.is_message()) return "message";
  switch (frame.checkpoint) {
    case kDecoyCB: return "decoy-CB";
    case kDecoyAB: return "decoy-AB";
    case kDecoyABo: return "decoy-ABo";
    default: return "decoy-" + std::to_string(frame.checkpoint);
  }
}

std::vector<TimeFrame> schedule_frames(std::span<const std::size_t> decoys_per_checkpoint,
                                       std::size_t n_message, std::uint64_t seed) {
  if (n_message == 0) throw std::invalid_argument("a run needs at least one message frame");
  std::vector<TimeFrame> frames;
  for (std::size_t c = 0; c < decoys_per_checkpoint.size(); ++c) {
    for (std::size_t k = 0; k < decoys_per_checkpoint[c]; ++k) {
      frames.push_back({0, FrameKind::Decoy, static_cast<int>(c)});
    }
  }
  for (std::size_t k = 0; k < n_message; ++k) frames.push_back({0, FrameKind::Message, -1});
  Rng rng(seed);
  std::shuffle(frames.begin(), frames.end(), rng.engine());
  for (std::size_t i = 0; i < frames.size(); ++i) frames[i].index = i;
  return frames;
}

std::vector<TimeFrame> schedule_frames(std::size_t n_decoy_cb, std::size_t n_decoy_ab,
                                       std::size_t n_decoy_abo, std::size_t n_message,
                                       std::uint64_t seed) {
  const std::size_t counts[] = {n_decoy_cb, n_decoy_ab, n_decoy_abo};
  return schedule_frames(counts, n_message, seed);
}

void ChannelParams::validate() const {
  if (!(eta > 0.0 && eta <= 1.0)) throw std::invalid_argument("eta must lie in (0, 1]");
  if (!(epsilon >= 0.0)) throw std::invalid_argument("epsilon must be >= 0");
}

double ChannelParams::gain() const { return 1.0 / std::sqrt(eta); }

double ChannelParams::hop_noise() const {
  const double lost = (1.0 - eta) / eta;
  double noise = lost * (kVacuumVariance + epsilon);
  if (amp == AmpMode::PhaseInsensitive) noise += lost * kVacuumVariance;
  return noise;
}

// ---------------------------------------------------------------------------

namespace {

json quad_json(const Quad& q) { return json::array({q.x, q.p}); }

struct PayloadVisitor {
  json operator()(const Receipt& m) const { return {{"count", m.count}}; }
  json operator()(const BellReference& m) const {
    return {{"x_mu", m.value.x_mu}, {"p_mu", m.value.p_mu}};
  }
  json operator()(const QuadratureChoice& m) const {
    return {{"quadrature", to_string(m.quadrature)}};
  }
  json operator()(const MeasurementReport& m) const {
    return {{"quadrature", to_string(m.quadrature)}, {"values", m.values}};
  }
  json operator()(const DecoyReveal& m) const {
    json out = json::object();
    for (const auto& [name, q] : m.values) out[name] = quad_json(q);
    return out;
  }
  json operator()(const FinalAnnouncement& m) const { return {{"X", m.x}, {"P", m.p}}; }
  json operator()(const ControlReveal& m) const {
    return {{"R_A", quad_json(m.r_a)}, {"R_B", quad_json(m.r_b)}, {"kappa", m.kappa}};
  }
  json operator()(const DecoyVerdict& m) const {
    return {{"pass", m.pass}, {"statistic", m.statistic}, {"threshold", m.threshold}};
  }
  json operator()(const VerdictAnnouncement& m) const {
    json out = {{"verdict", m.verdict}};
    out["statistic"] = m.statistic ? json(*m.statistic) : json(nullptr);
    return out;
  }
};

struct KindVisitor {
  const char* operator()(const Receipt&) const { return "receipt"; }
  const char* operator()(const BellReference&) const { return "bell-reference"; }
  const char* operator()(const QuadratureChoice&) const { return "quadrature-choice"; }
  const char* operator()(const MeasurementReport&) const { return "measurement"; }
  const char* operator()(const DecoyReveal&) const { return "decoy-reveal"; }
  const char* operator()(const FinalAnnouncement&) const { return "final-announcement"; }
  const char* operator()(const ControlReveal&) const { return "control-reveal"; }
  const char* operator()(const DecoyVerdict&) const { return "decoy-verdict"; }
  const char* operator()(const VerdictAnnouncement&) const { return "verdict"; }
};

}  // namespace

const char* payload_kind(const Payload& payload) { return std::visit(KindVisitor{}, payload); }

json payload_json(const Payload& payload) { return std::visit(PayloadVisitor{}, payload); }

json RunStatus::to_json() const {
  if (!aborted) return {{"status", "completed"}};
  json out = {{"status", "aborted"}, {"reason", reason}, {"frame", frame}};
  out["hop"] = hop >= 0 ? json(hop) : json(nullptr);
  if (!checkpoint.empty()) out["checkpoint"] = checkpoint;
  return out;
}

// ---------------------------------------------------------------------------

void Transcript::append(std::int64_t frame, std::string_view actor, std::string_view kind,
                        json data) {
  const std::uint64_t seq = next_seq_++;
  if (!recording_) return;
  events_.push_back({seq, frame, std::string(actor), std::string(kind), std::move(data)});
}

std::string Transcript::to_jsonl(std::optional<std::size_t> trial) const {
  std::string out;
  for (const auto& e : events_) {
    json line;
    if (trial) line["trial"] = *trial;
    line["seq"] = e.seq;
    line["frame"] = e.frame;
    line["actor"] = e.actor;
    line["kind"] = e.kind;
    line["data"] = e.data;
    out += line.dump();
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------

Bus::Bus(Transcript& transcript, std::vector<std::string> parties)
    : transcript_(transcript), parties_(std::move(parties)) {
  if (std::find(parties_.begin(), parties_.end(), "eve") == parties_.end()) {
    parties_.push_back("eve");
  }
  inboxes_.resize(parties_.size());
}

std::size_t Bus::party_slot(std::string_view party) const {
  const auto it = std::find(parties_.begin(), parties_.end(), party);
  if (it == parties_.end()) throw std::invalid_argument("unknown party " + std::string(party));
  return static_cast<std::size_t>(it - parties_.begin());
}

void Bus::broadcast(ClassicalMsg msg) {
  party_slot(msg.sender);
  transcript_.record(msg.frame, msg.sender, "broadcast", [&] {
    return json{{"type", payload_kind(msg.payload)}, {"payload", payload_json(msg.payload)}};
  });
  messages_.push_back(std::move(msg));
  const std::size_t id = messages_.size() - 1;
  for (auto& box : inboxes_) box.push_back(id);
  for (auto* listener : listeners_) listener->on_public(messages_[id]);
}

void Bus::send_private(ClassicalMsg msg, const std::vector<std::string>& recipients) {
  party_slot(msg.sender);
  for (const auto& r : recipients) {
    if (r == "eve") throw std::invalid_argument("private messages cannot address eve");
    party_slot(r);
  }
  transcript_.record(msg.frame, msg.sender, "private", [&] {
    return json{{"type", payload_kind(msg.payload)},
                {"to", recipients},
                {"payload", payload_json(msg.payload)}};
  });
  messages_.push_back(std::move(msg));
  const std::size_t id = messages_.size() - 1;
  for (const auto& r : recipients) inboxes_[party_slot(r)].push_back(id);
}

std::vector<const ClassicalMsg*> Bus::inbox(std::string_view party) const {
  std::vector<const ClassicalMsg*> out;
  for (std::size_t id : inboxes_[party_slot(party)]) out.push_back(&messages_[id]);
  return out;
}

// ---------------------------------------------------------------------------

void transfer(FramePulse& pulse, std::size_t mode, const ChannelParams& channel, const Hop& hop,
              Rng& physics, ChannelTap* tap) {
  if (pulse.state.consumed(mode)) {
    throw InvalidState("cannot transfer mode " + std::to_string(mode) + " of frame " +
                       std::to_string(pulse.frame.index) + ": already measured");
  }
  pulse.state.loss_channel(mode, channel.eta, channel.epsilon, physics);
  if (tap != nullptr) tap->on_transfer(pulse, mode, hop, physics);
  pulse.state.amplify(mode, channel.gain(), channel.amp, physics);
}

}  // namespace cvcqd
