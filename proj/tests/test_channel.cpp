#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cvcqd/adversary.hpp"
#include "cvcqd/channel.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace cvcqd;
using doctest::Approx;

namespace {

// Remembers the in-flight quadrature the moment the tap runs.
struct RecordingTap : ChannelTap {
  Quad seen;
  Quad shift;
  void on_transfer(FramePulse& pulse, std::size_t mode, const Hop&, Rng&) override {
    seen = pulse.state.quad(mode);
    pulse.state.displace(mode, shift);
  }
};

FramePulse pulse_of(std::vector<Quad> quads) {
  return {TimeFrame{0, FrameKind::Message, -1}, ShotState(std::move(quads), 0)};
}

}  // namespace

TEST_SUITE("channel") {

TEST_CASE("frame schedules") {
  const auto one = schedule_frames(0, 0, 0, 1, 5);
  REQUIRE(one.size() == 1);
  CHECK(one[0].is_message());
  CHECK(one[0].index == 0);

  const auto many = schedule_frames(50, 50, 50, 1, 5);
  REQUIRE(many.size() == 151);
  std::map<int, int> roles;
  for (std::size_t i = 0; i < many.size(); ++i) {
    CHECK(many[i].index == i);
    ++roles[many[i].checkpoint];
  }
  CHECK(roles[kDecoyCB] == 50);
  CHECK(roles[kDecoyAB] == 50);
  CHECK(roles[kDecoyABo] == 50);
  CHECK(roles[-1] == 1);

  const auto again = schedule_frames(50, 50, 50, 1, 5);
  const auto other = schedule_frames(50, 50, 50, 1, 6);
  auto roles_of = [](const std::vector<TimeFrame>& f) {
    std::vector<int> r;
    for (const auto& t : f) r.push_back(t.checkpoint);
    return r;
  };
  CHECK(roles_of(many) == roles_of(again));
  CHECK(roles_of(many) != roles_of(other));
  CHECK_THROWS_AS(schedule_frames(1, 1, 1, 0, 5), std::invalid_argument);
}

TEST_CASE("ideal transfer is a bit-exact identity") {
  FramePulse p = pulse_of({{0.123456789, -2.5}, {3.0, 1e-7}});
  const auto before = p.state.quads();
  Rng rng(1);
  transfer(p, 0, ChannelParams{}, Hop{0, "charlie", "bob"}, rng);
  transfer(p, 1, ChannelParams{}, Hop{1, "charlie", "alice"}, rng);
  CHECK(p.state.quads() == before);
}

TEST_CASE("lossy transfer restores the mean and inflates the variance") {
  const ChannelParams ch{0.5, 0.0, AmpMode::Ideal};
  std::vector<double> xs;
  Rng rng(2);
  for (int k = 0; k < 100000; ++k) {
    FramePulse p{TimeFrame{}, ShotState::vacuum(1, rng)};
    p.state.displace(0, {1.0, 0.0});
    transfer(p, 0, ch, Hop{}, rng);
    xs.push_back(p.state.quad(0).x);
  }
  CHECK(std::abs(testutil::mean(xs) - 1.0) <= 5 * std::sqrt(0.5 / 1e5));
  // 1/4 in, plus (1 - eta)/eta * 1/4 = 1/4 added.
  CHECK(std::abs(testutil::variance(xs) - 0.5) <= 5 * testutil::variance_se(0.5, 100000));
  CHECK(ch.hop_noise() == Approx(0.25));
}

TEST_CASE("taps sit between loss and amplification") {
  const double eta = 0.25;
  const ChannelParams ch{eta, 0.0, AmpMode::Ideal};
  RecordingTap tap;
  tap.shift = {0.3, -0.4};
  FramePulse p = pulse_of({{8.0, -4.0}});
  Rng rng(3);
  transfer(p, 0, ch, Hop{}, rng, &tap);
  // The tap saw the attenuated mode: mean sqrt(eta) * 8 plus environment noise.
  CHECK(std::abs(tap.seen.x - 4.0) < 3.0);
  const double g = 1.0 / std::sqrt(eta);
  CHECK(p.state.quad(0).x == Approx(g * (tap.seen.x + 0.3)).epsilon(1e-14));
  CHECK(p.state.quad(0).p == Approx(g * (tap.seen.p - 0.4)).epsilon(1e-14));
}

TEST_CASE("disturbance shifts the received mean by d on an ideal channel") {
  const double d = 5.0 * std::sqrt(std::exp(-2.0) / 2.0);
  FramePulse clean = pulse_of({{0.2, 0.1}});
  FramePulse hit = pulse_of({{0.2, 0.1}});
  Rng a(4), b(4), eve(9);
  transfer(clean, 0, ChannelParams{}, Hop{}, a);
  struct Disturb : ChannelTap {
    double d;
    Rng* eve;
    void on_transfer(FramePulse& p, std::size_t m, const Hop&, Rng&) override {
      disturbance_tap(p, m, d, *eve);
    }
  } tap;
  tap.d = d;
  tap.eve = &eve;
  transfer(hit, 0, ChannelParams{}, Hop{}, b, &tap);
  const Quad diff = hit.state.quad(0) - clean.state.quad(0);
  CHECK(std::hypot(diff.x, diff.p) == Approx(d).epsilon(1e-12));
}

TEST_CASE("transferring a measured mode is an error") {
  FramePulse p = pulse_of({{0, 0}});
  p.state.homodyne(0, Quadrature::X);
  Rng rng(1);
  CHECK_THROWS_AS(transfer(p, 0, ChannelParams{}, Hop{}, rng), InvalidState);
}

TEST_CASE("broadcasts reach everyone in order; private messages skip eve") {
  Transcript t;
  Bus bus(t, {"charlie", "alice", "bob"});
  struct Listener : BusListener {
    std::vector<std::int64_t> frames;
    void on_public(const ClassicalMsg& m) override { frames.push_back(m.frame); }
  } listener;
  bus.add_listener(&listener);

  bus.broadcast({"charlie", 0, BellReference{{0.5, -0.25}}});
  bus.broadcast({"bob", 1, FinalAnnouncement{1.0, 2.0}});
  bus.send_private({"charlie", 1, ControlReveal{{1, 2}, {3, 4}, 1.0}}, {"alice", "bob"});

  for (const char* who : {"charlie", "alice", "bob", "eve"}) {
    const auto box = bus.inbox(who);
    REQUIRE(box.size() >= 2);
    CHECK(std::holds_alternative<BellReference>(box[0]->payload));
    CHECK(std::holds_alternative<FinalAnnouncement>(box[1]->payload));
  }
  CHECK(bus.inbox("eve").size() == 2);
  CHECK(bus.inbox("charlie").size() == 2);
  CHECK(bus.inbox("alice").size() == 3);
  CHECK(listener.frames == std::vector<std::int64_t>{0, 1});

  REQUIRE(t.events().size() == 3);
  CHECK(t.events()[0].seq == 0);
  CHECK(t.events()[1].seq == 1);
  CHECK(t.events()[0].kind == "broadcast");
  CHECK(t.events()[2].kind == "private");

  CHECK_THROWS_AS(bus.send_private({"charlie", 1, Receipt{}}, {"eve"}), std::invalid_argument);
  CHECK_THROWS_AS(bus.send_private({"charlie", 1, Receipt{}}, {"mallory"}),
                  std::invalid_argument);
  CHECK_THROWS_AS(bus.broadcast({"mallory", 1, Receipt{}}), std::invalid_argument);
  CHECK(t.events().size() == 3);
}

TEST_CASE("transcript lines carry the stable field names") {
  Transcript t;
  t.append(3, "bob", "measure", json{{"q", "X"}});
  t.record(4, "alice", "encode", [] { return json::object(); });
  std::istringstream in(t.to_jsonl(7));
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    const json j = json::parse(line);
    for (const char* key : {"seq", "frame", "actor", "kind", "data", "trial"}) {
      CHECK(j.contains(key));
    }
    CHECK(j.size() == 6);
    ++n;
  }
  CHECK(n == 2);

  Transcript off(false);
  bool built = false;
  off.record(0, "x", "y", [&] {
    built = true;
    return json::object();
  });
  CHECK_FALSE(built);
  CHECK(off.size() == 1);
  CHECK(off.to_jsonl().empty());
}

TEST_CASE("run status serialization") {
  CHECK(RunStatus{}.to_json() == json{{"status", "completed"}});
  RunStatus s{true, "decoy-fail", 12, 0, "decoy-CB"};
  const json j = s.to_json();
  CHECK(j["status"] == "aborted");
  CHECK(j["reason"] == "decoy-fail");
  CHECK(j["frame"] == 12);
  CHECK(j["checkpoint"] == "decoy-CB");
}

}  // TEST_SUITE
