#include <filesystem>
#include <string>

#include "cvcqd/config.hpp"
#include "doctest.h"

using namespace cvcqd;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("minimal config takes defaults") {
  const ScenarioConfig cfg = parse_config("{}");
  CHECK(cfg.protocol == Protocol::Cqd);
  CHECK(cfg.trials == 1);
  CHECK(cfg.cqd.squeezing_r == 1.0);
}

TEST_CASE("fields are applied") {
  const ScenarioConfig cfg = parse_config(R"({
    "protocol": "smp2", "seed": 9, "trials": 20, "squeezing_r": 2,
    "channel": {"eta": 0.9, "epsilon": 0.01, "amp_mode": "phase-insensitive"},
    "attack": {"kind": "beam-splitter", "betas": [0.3, 0.6, 0.45]},
    "wealth": {"mode": "fixed", "values": [3, 5]}
  })");
  CHECK(cfg.protocol == Protocol::Smp2);
  CHECK(cfg.seed == 9);
  CHECK(cfg.cqd.channel.eta == 0.9);
  CHECK(cfg.cqd.channel.amp == AmpMode::PhaseInsensitive);
  CHECK(cfg.smp.squeezing_r == 2.0);
  CHECK(cfg.smp.channel.eta == 0.9);
  CHECK(cfg.attack.kind == AttackKind::BeamSplitter);
  CHECK(cfg.attack.betas[1] == 0.6);
  CHECK(cfg.wealth.values.size() == 2);
}

TEST_CASE("unknown fields are reported with their path") {
  CHECK(error_of(R"({"channel": {"etaa": 1}})").find("/channel/etaa") != std::string::npos);
  CHECK(error_of(R"({"sead": 1})").find("/sead") != std::string::npos);
}

TEST_CASE("malformed JSON is reported with line and column") {
  const std::string msg = error_of("{\n  \"seed\": 1,\n  oops\n}");
  CHECK(msg.find("line 3") != std::string::npos);
  CHECK(msg.find("column") != std::string::npos);
}

TEST_CASE("out-of-range values are rejected") {
  CHECK_FALSE(error_of(R"({"channel": {"eta": 0}})").empty());
  CHECK_FALSE(error_of(R"({"channel": {"eta": 1.5}})").empty());
  CHECK_FALSE(error_of(R"({"squeezing_r": -1})").empty());
  CHECK_FALSE(error_of(R"({"trials": 0})").empty());
  CHECK_FALSE(error_of(R"({"trials": 2.5})").empty());
  CHECK_FALSE(error_of(R"({"kappa": 2})").empty());
  CHECK_FALSE(error_of(R"({"attack": {"kind": "teleport"}})").empty());
  CHECK_FALSE(error_of(R"({"attack": {"betas": [0.5, 0.5]}})").empty());
  CHECK_FALSE(error_of(R"({"protocol": "smpn", "wealth": {"n_parties": 2}})").empty());
  CHECK_FALSE(error_of(R"({"sweep": {"param": "squeezing_r", "grid": []}})").empty());
  CHECK_FALSE(error_of(R"({"sweep": {"param": "colour", "grid": [1]}})").empty());
  CHECK_FALSE(error_of(R"({"seed": "one"})").empty());
}

TEST_CASE("every shipped preset loads") {
  std::size_t n = 0;
  for (const auto& e : std::filesystem::directory_iterator(CVCQD_PRESET_DIR)) {
    if (e.path().extension() != ".json") continue;
    INFO(e.path().string());
    CHECK_NOTHROW(load_config(preset_path(e.path().stem().string())));
    ++n;
  }
  CHECK(n >= 12);
  CHECK_THROWS_AS(load_config(preset_path("no_such_preset")), ConfigError);
  CHECK_THROWS_AS(preset_path("../etc/passwd"), ConfigError);
}

TEST_CASE("sweep parameters") {
  for (const auto& name : sweepable_params()) {
    ScenarioConfig cfg;
    INFO(name);
    CHECK_NOTHROW(apply_param(cfg, name, name == "n_parties" ? 4.0 : 0.5));
  }
  ScenarioConfig cfg;
  apply_param(cfg, "squeezing_r", 1.5);
  CHECK(cfg.cqd.squeezing_r == 1.5);
  CHECK(cfg.smp.squeezing_r == 1.5);
  apply_param(cfg, "eta", 0.8);
  CHECK(cfg.cqd.channel.eta == 0.8);
  CHECK_THROWS_AS(apply_param(cfg, "colour", 1.0), ConfigError);
  CHECK_THROWS_AS(apply_param(cfg, "n_parties", 3.5), ConfigError);
}

}  // TEST_SUITE
