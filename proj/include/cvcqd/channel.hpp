#pragma once

// Pulse-train substrate: time frames, quantum mode transfers through lossy
// channels with optional taps, an authenticated classical bus and the
// append-only run transcript.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "cvcqd/phase_space.hpp"
#include "json.hpp"

namespace cvcqd {

using json = nlohmann::json;

enum class FrameKind { Decoy, Message };

struct TimeFrame {
  std::size_t index = 0;
  FrameKind kind = FrameKind::Message;
  int checkpoint = -1;  // decoy class; -1 for message frames

  bool is_message() const { return kind == FrameKind::Message; }
};

// CQD checkpoint classes.
inline constexpr int kDecoyCB = 0;   // T1: Charlie vs Bob
inline constexpr int kDecoyAB = 1;   // T2: Alice vs Bob
inline constexpr int kDecoyABo = 2;  // T3: Alice's decoy displacements on the Alice->Bob hop

std::string cqd_role_name(const TimeFrame& frame);

// Random interleaving of decoy classes and message frames, fixed by `seed`.
std::vector<TimeFrame> schedule_frames(std::span<const std::size_t> decoys_per_checkpoint,
                                       std::size_t n_message, std::uint64_t seed);
std::vector<TimeFrame> schedule_frames(std::size_t n_decoy_cb, std::size_t n_decoy_ab,
                                       std::size_t n_decoy_abo, std::size_t n_message,
                                       std::uint64_t seed);

struct FramePulse {
  TimeFrame frame;
  ShotState state;
};

struct ChannelParams {
  double eta = 1.0;
  double epsilon = 0.0;
  AmpMode amp = AmpMode::Ideal;

  void validate() const;
  double gain() const;
  // Noise variance per quadrature added by one hop (loss + receiver amp),
  // referred to the amplifier output.
  double hop_noise() const;
};

struct Hop {
  std::size_t index = 0;
  std::string from;
  std::string to;

  std::string name() const { return from + "->" + to; }
};

// ---------------------------------------------------------------------------
// Classical messages

struct Receipt {
  std::size_t count = 0;
};
struct BellReference {
  BellOutcome value;
};
struct QuadratureChoice {
  Quadrature quadrature = Quadrature::X;
};
struct MeasurementReport {
  Quadrature quadrature = Quadrature::X;
  std::vector<double> values;
};
struct DecoyReveal {
  std::vector<std::pair<std::string, Quad>> values;
};
struct FinalAnnouncement {
  double x = 0.0;
  double p = 0.0;
};
struct ControlReveal {
  Quad r_a;
  Quad r_b;
  double kappa = 1.0;
};
struct DecoyVerdict {
  bool pass = true;
  double statistic = 0.0;
  double threshold = 0.0;
};
struct VerdictAnnouncement {
  std::string verdict;
  std::optional<double> statistic;
};

using Payload = std::variant<Receipt, BellReference, QuadratureChoice, MeasurementReport,
                             DecoyReveal, FinalAnnouncement, ControlReveal, DecoyVerdict,
                             VerdictAnnouncement>;

// Sender identity is authenticated: a receiver always learns the true sender.
struct ClassicalMsg {
  std::string sender;
  std::int64_t frame = -1;
  Payload payload;
};

const char* payload_kind(const Payload& payload);
json payload_json(const Payload& payload);

// ---------------------------------------------------------------------------
// Transcript

struct TranscriptEvent {
  std::uint64_t seq = 0;
  std::int64_t frame = -1;
  std::string actor;
  std::string kind;
  json data;
};

struct RunStatus {
  bool aborted = false;
  std::string reason;
  std::int64_t frame = -1;
  std::int64_t hop = -1;
  std::string checkpoint;

  json to_json() const;
};

class Transcript {
 public:
  explicit Transcript(bool recording = true) : recording_(recording) {}

  bool recording() const { return recording_; }
  std::uint64_t size() const { return next_seq_; }
  const std::vector<TranscriptEvent>& events() const { return events_; }

  void append(std::int64_t frame, std::string_view actor, std::string_view kind, json data);

  // Builds the payload only when recording.
  template <class MakeData>
  void record(std::int64_t frame, std::string_view actor, std::string_view kind,
              MakeData&& make_data) {
    if (recording_) {
      append(frame, actor, kind, make_data());
    } else {
      ++next_seq_;
    }
  }

  // One JSON object per line with fields {seq, frame, actor, kind, data};
  // `trial` is added when given.
  std::string to_jsonl(std::optional<std::size_t> trial = std::nullopt) const;

 private:
  bool recording_;
  std::uint64_t next_seq_ = 0;
  std::vector<TranscriptEvent> events_;
};

// ---------------------------------------------------------------------------
// Bus

class BusListener {
 public:
  virtual ~BusListener() = default;
  virtual void on_public(const ClassicalMsg& msg) = 0;
};

class Bus {
 public:
  Bus(Transcript& transcript, std::vector<std::string> parties);

  // Delivered to every party, to "eve" and to listeners; logged in order.
  void broadcast(ClassicalMsg msg);
  // Authenticated private channel; Eve and listeners see nothing.
  void send_private(ClassicalMsg msg, const std::vector<std::string>& recipients);

  void add_listener(BusListener* listener) { listeners_.push_back(listener); }

  std::vector<const ClassicalMsg*> inbox(std::string_view party) const;
  const std::vector<ClassicalMsg>& messages() const { return messages_; }

 private:
  std::size_t party_slot(std::string_view party) const;

  Transcript& transcript_;
  std::vector<std::string> parties_;
  std::vector<ClassicalMsg> messages_;
  std::vector<std::vector<std::size_t>> inboxes_;
  std::vector<BusListener*> listeners_;
};

// ---------------------------------------------------------------------------
// Quantum transfer

class ChannelTap {
 public:
  virtual ~ChannelTap() = default;
  virtual void on_transfer(FramePulse& pulse, std::size_t mode, const Hop& hop,
                           Rng& physics) = 0;
};

// loss(eta, epsilon) -> tap -> receiver amplification with g = 1/sqrt(eta).
void transfer(FramePulse& pulse, std::size_t mode, const ChannelParams& channel, const Hop& hop,
              Rng& physics, ChannelTap* tap = nullptr);

}  // namespace cvcqd
