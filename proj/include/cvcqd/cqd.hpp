#pragma once

// Controlled quantum dialogue. Charlie prepares a two-mode squeezed vacuum per
// frame, broadcasts its Bell reference, hides it under random displacements
// R_A, R_B and distributes one mode to Bob and one to Alice. After decoy
// checks Alice encodes and forwards that mode to Bob, Bob encodes, Bell
// measures and announces (X, P). Nobody decodes until Charlie reveals R.

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cvcqd/adversary.hpp"
#include "cvcqd/channel.hpp"

namespace cvcqd {

enum class ReferenceMode { Shared, Fresh };
enum class CharlieBehavior { Honest, AuxModeSwap, SeparableState };

const char* to_string(ReferenceMode m);
const char* to_string(CharlieBehavior b);

// Optional N-bit grid per quadrature over [-range, range]; bits = 0 is off.
struct Quantizer {
  unsigned bits = 0;
  double range = 4.0;

  bool enabled() const { return bits > 0; }
  double apply(double v) const;
  void validate() const;
};

struct DialogueMessage {
  Quad alice;
  Quad bob;
};

struct MessageSpec {
  double variance = 0.25;                // per quadrature, used when `fixed` is empty
  std::optional<double> bob_variance;    // Bob's variance when it differs from Alice's
  std::optional<DialogueMessage> fixed;  // same message on every message frame
  Quantizer quantizer;
};

struct CqdParams {
  double squeezing_r = 1.0;
  ChannelParams channel;
  std::array<std::size_t, 3> decoys{50, 50, 50};  // decoy-CB, decoy-AB, decoy-ABo
  std::size_t n_message = 1;
  double threshold_c = 4.0;
  double schedule_variance = 25.0;  // V_R per quadrature
  double offset_x = 0.0;            // x': mode 0 displaced by x' + i x'
  double offset_y = 0.0;            // y': mode 1 displaced by y' + i y'
  ReferenceMode reference = ReferenceMode::Shared;
  bool reapply_offsets = true;
  double kappa = 1.0;
  bool reveal_public = false;
  bool enforce_abort = true;
  MessageSpec messages;
  CharlieBehavior charlie = CharlieBehavior::Honest;

  void validate() const;  // throws std::invalid_argument
};

// Charlie's private schedule for one frame.
struct DisplacementSchedule {
  Quad r_a;
  Quad r_b;
};

struct DecodeResult {
  double X = 0.0;
  double P = 0.0;
  Quad alice_estimate;  // Bob's estimate of Alice's message
  Quad bob_estimate;    // Alice's estimate of Bob's message
  Quad alice_error;     // estimate minus truth
  Quad bob_error;
};

struct DecoyCheck {
  std::size_t frame = 0;
  int checkpoint = 0;
  Quadrature quadrature = Quadrature::X;
  double statistic = 0.0;
  double threshold = 0.0;
  bool pass = true;
};

struct MessageOutcome {
  std::size_t frame = 0;
  DialogueMessage truth;
  DecodeResult decode;
  BellOutcome reference;
  DisplacementSchedule schedule;  // Charlie's record, for participant-attack analysis
};

struct CqdRun {
  RunStatus status;
  std::vector<TimeFrame> frames;
  std::vector<DecoyCheck> decoys;
  std::vector<MessageOutcome> messages;
  Transcript transcript;

  // Aborted, or (with enforce_abort off) any failed decoy.
  bool detected() const;
};

// ---------------------------------------------------------------------------
// Building blocks

// Charlie's preparation of one frame: vacuum, offsets, squeeze, reference from the
// realization that continues (or a fresh one in Fresh mode), then R_B on
// mode 0 and R_A on mode 1.
struct PreparedFrame {
  FramePulse pulse;
  BellOutcome reference;
};
PreparedFrame charlie_prepare(const TimeFrame& frame, const CqdParams& params,
                              const DisplacementSchedule& schedule, Rng& physics);

// Decoy statistic. `first` is the value measured on mode 0, `second` on
// mode 1. The reveal must carry R_A and R_B (and D_A for decoy-ABo).
// X: d = (x0 - x_RB) - (x1 - x_RA - x_DA) - sqrt2 X_mu0
// P: d = (p0 - p_RB) + (p1 - p_RA - p_DA) - sqrt2 P_mu0
DecoyCheck verify_decoy(const TimeFrame& frame, Quadrature q, double first, double second,
                        const std::optional<DecoyReveal>& reveal, BellOutcome reference,
                        double v_pred, double c);

// Variance of the honest decoy statistic at a checkpoint for the configured
// channel, from the ensemble engine.
double predicted_decoy_variance(const CqdParams& params, int checkpoint, Quadrature q);

void alice_encode(FramePulse& pulse, std::size_t mode, Quad message);
void bob_encode(FramePulse& pulse, std::size_t mode, Quad message);

// Decode from the announcement, the (possibly blurred) reveal and one's own
// message.
Quad decode_partner(double X, double P, const ControlReveal& reveal, Quad own);

// ---------------------------------------------------------------------------

class CqdSession {
 public:
  enum class Phase {
    Created,
    Prepared,
    AtBob,
    AtAlice,
    AliceEncoded,
    Delivered,
    Announced,
    Revealed,
    Decoded,
    Aborted,
  };

  CqdSession(CqdParams params, std::uint64_t seed, AttackStrategy* eve = nullptr,
             bool record_transcript = true);

  void prepare();                  // state preparation, reference broadcast
  void send_to_bob();              // Charlie -> Bob, then checkpoint decoy-CB
  void send_to_alice();            // Charlie -> Alice, then checkpoint decoy-AB
  void alice_encode_all();
  void forward_to_bob();           // Alice -> Bob, then checkpoint decoy-ABo
  void bob_encode_and_announce();  // Bob encodes, Bell measures, announces
  void charlie_reveal();           // controlled reveal of R
  void decode();

  void run_all();
  Phase phase() const { return phase_; }
  const CqdParams& params() const { return params_; }
  const std::vector<TimeFrame>& frames() const { return frames_; }
  CqdRun take_result();

 private:
  struct Slot {
    PreparedFrame prep;
    DisplacementSchedule schedule;  // Charlie only
    Quad decoy_a;                   // Alice only, decoy-ABo frames
    DialogueMessage message;        // each party reads only its own half
    std::optional<ControlReveal> reveal;
    std::size_t charlie_mode = 1;   // mode Charlie keeps on decoy-CB frames
  };

  void expect(Phase p, const char* step) const;
  bool halted() const { return phase_ == Phase::Aborted; }
  Hop hop(std::size_t index) const;
  void move(Slot& s, std::size_t mode, std::size_t hop_index);
  void run_checkpoint(int checkpoint);
  bool judge(const DecoyCheck& check);

  CqdParams params_;
  AttackStrategy* eve_;
  Phase phase_ = Phase::Created;
  Rng physics_, protocol_, schedule_rng_, messages_rng_, reveal_rng_, alice_rng_;
  std::uint64_t frame_seed_;
  std::vector<TimeFrame> frames_;
  std::vector<Slot> slots_;
  std::array<std::array<double, 2>, 3> v_pred_{};
  std::map<std::int64_t, FinalAnnouncement> announcements_;
  CqdRun result_;
  Bus bus_;
};

CqdRun run_cqd(const CqdParams& params, std::uint64_t seed, AttackStrategy* eve = nullptr,
               bool record_transcript = true);

}  // namespace cvcqd
