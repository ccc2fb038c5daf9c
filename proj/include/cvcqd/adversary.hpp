#pragma once

// Eavesdropper strategy catalog. Every strategy is a channel tap: it sees the
// in-flight pulse after channel loss, may couple in modes of its own, and
// keeps a private log of what it measured plus every public broadcast. It has
// no access to anything a party keeps private.

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cvcqd/channel.hpp"

namespace cvcqd {

enum class AttackKind { None, PassiveListen, Disturbance, InterceptResend, BeamSplitter, CloneNoise };

const char* to_string(AttackKind kind);
AttackKind parse_attack_kind(const std::string& name);  // throws std::invalid_argument
const std::vector<AttackKind>& attack_catalog();        // every kind except None

struct AttackSpec {
  AttackKind kind = AttackKind::None;
  double d = -1.0;  // disturbance magnitude; < 0 selects 5 * sqrt(e^{-2r}/2)
  std::array<double, 3> betas{0.5, 0.5, 0.5};
  double delta = 0.25;            // clone excess noise per quadrature
  std::vector<std::size_t> hops;  // empty selects the strategy's default hops

  void validate() const;
  double disturbance_magnitude(double squeezing_r) const;
};

// What Eve is allowed to know in advance: public protocol parameters only.
struct PublicParams {
  double squeezing_r = 1.0;
  std::size_t second_hop = 2;  // hop carrying the encoded mode for the beam-splitter attack
};

struct EveRecord {
  std::int64_t frame = -1;
  std::size_t hop = 0;
  std::string label;
  double value = 0.0;
};

struct EveLog {
  std::vector<EveRecord> records;
  std::vector<ClassicalMsg> broadcasts;

  // Observation vector for one frame: Eve's recorded values in record order,
  // optionally followed by the frame's public Bell reference and final
  // announcement.
  std::vector<double> features(std::int64_t frame, bool include_broadcasts) const;
  std::string to_jsonl(std::optional<std::size_t> trial = std::nullopt) const;
};

// ---------------------------------------------------------------------------
// Individual taps

// Displaces the in-flight mode by d along a uniformly random direction.
void disturbance_tap(FramePulse& pulse, std::size_t mode, double d, Rng& eve);

// Replaces the in-flight mode by one half of Eve's own two-mode squeezed
// vacuum displaced so its Bell reference mean equals `reference`. Returns the
// mode index of Eve's retained half; the intercepted original is left at the
// index of the half that was sent.
struct InterceptModes {
  std::size_t retained;
  std::size_t intercepted;
};
InterceptModes intercept_resend_tap(FramePulse& pulse, std::size_t mode, BellOutcome reference,
                                    double r, Rng& physics);

// One printed-form beam splitter coupling a fresh Eve vacuum mode into the
// in-flight mode. Returns the index of Eve's output mode.
std::size_t beam_splitter_stage(FramePulse& pulse, std::size_t mode, double beta, Rng& physics);
// Third stage: combines Eve's two stored modes and measures X of e32 and P of e31.
Quad beam_splitter_readout(FramePulse& pulse, std::size_t e21, std::size_t e22, double beta3);

// Symmetric excess-noise model of cloning: the in-flight mode and Eve's copy
// each receive independent noise of variance delta. Returns Eve's copy.
std::size_t clone_noise_tap(FramePulse& pulse, std::size_t mode, double delta, Rng& physics);

// ---------------------------------------------------------------------------

class AttackStrategy : public ChannelTap, public BusListener {
 public:
  AttackStrategy(AttackSpec spec, PublicParams pub, std::uint64_t seed);

  void on_transfer(FramePulse& pulse, std::size_t mode, const Hop& hop, Rng& physics) override;
  void on_public(const ClassicalMsg& msg) override;

  const AttackSpec& spec() const { return spec_; }
  const std::vector<std::size_t>& hops() const { return hops_; }
  const EveLog& log() const { return log_; }

  // Ground-truth quadratures of Eve's injected vacuum modes. Simulation
  // instrumentation for oracle tests; never feeds Eve's own estimates.
  const std::vector<EveRecord>& instrumentation() const { return instrumentation_; }

 private:
  bool targets(std::size_t hop) const;
  void record(std::int64_t frame, std::size_t hop, std::string label, double value);

  AttackSpec spec_;
  PublicParams pub_;
  std::vector<std::size_t> hops_;
  Rng rng_;
  EveLog log_;
  std::vector<EveRecord> instrumentation_;
  std::map<std::int64_t, BellOutcome> references_;
  std::map<std::int64_t, std::size_t> stored_e21_;
};

}  // namespace cvcqd
