#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "cvcqd/runner.hpp"
#include "doctest.h"

using namespace cvcqd;

namespace {

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

std::size_t count_lines(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

}  // namespace

TEST_SUITE("runner") {

TEST_CASE("metrics files start with a schema line and a header") {
  ScenarioConfig cfg = parse_config(R"({"trials": 5, "decoys": {"cb": 2, "ab": 2, "abo": 2}})");
  BatchOutput out = run_batch(cfg);
  CHECK(first_line(out.metrics_csv) == "# schema: cvcqd-cqd-trials/1");
  CHECK(out.metrics_csv.find("\ntrial,aborted,") != std::string::npos);
  CHECK(count_lines(out.metrics_csv) == 2 + 5);
  CHECK(out.summary.contains("detection"));
  CHECK_FALSE(out.transcript_jsonl.empty());

  cfg = parse_config(R"({"protocol": "smp2", "trials": 4})");
  CHECK(first_line(run_batch(cfg).metrics_csv) == "# schema: cvcqd-smp2-trials/1");
  cfg = parse_config(R"({"protocol": "smpn", "trials": 4})");
  CHECK(first_line(run_batch(cfg).metrics_csv) == "# schema: cvcqd-smpn-trials/1");
}

TEST_CASE("batches are identical across worker counts") {
  ScenarioConfig cfg = parse_config(R"({"trials": 12, "transcript_trials": 12, "seed": 5,
                                       "attack": {"kind": "clone-noise"}, "dump_eve_log": true})");
  cfg.workers = 1;
  const BatchOutput a = run_batch(cfg);
  cfg.workers = 4;
  const BatchOutput b = run_batch(cfg);
  CHECK(a.metrics_csv == b.metrics_csv);
  CHECK(a.transcript_jsonl == b.transcript_jsonl);
  CHECK(a.eve_log_jsonl == b.eve_log_jsonl);
  CHECK(a.summary.dump() == b.summary.dump());
  cfg.seed = 6;
  CHECK(run_batch(cfg).metrics_csv != a.metrics_csv);
}

TEST_CASE("sweeps") {
  const ScenarioConfig cfg = parse_config(R"({"trials": 3})");
  CHECK_THROWS_AS(run_sweep(cfg, SweepSpec{"squeezing_r", {}}), ConfigError);
  CHECK_THROWS_AS(run_sweep(cfg, SweepSpec{"colour", {1.0}}), ConfigError);
  const BatchOutput out = run_sweep(cfg, SweepSpec{"squeezing_r", {0.5, 1.0}});
  CHECK(first_line(out.metrics_csv) == "# schema: cvcqd-sweep/1");
  CHECK(count_lines(out.metrics_csv) == 2 + 2);
  CHECK(out.summary["points"].size() == 2);
}

TEST_CASE("attack sweep covers none plus the catalog by default") {
  const ScenarioConfig cfg = parse_config(R"({"trials": 2})");
  const BatchOutput out = run_attack_sweep(cfg);
  CHECK(out.summary["attacks"].size() == 1 + attack_catalog().size());
  CHECK(first_line(out.metrics_csv) == "# schema: cvcqd-attack-sweep/1");
}

TEST_CASE("capacity table") {
  ScenarioConfig cfg = parse_config(R"({"capacity": {"r_grid": [0, 1, 2], "sigma": 0.5}})");
  const BatchOutput out = capacity_table(cfg);
  CHECK(out.summary["strictly_increasing"] == true);
  CHECK(out.summary["rows"].size() == 3);
  CHECK(out.summary["rows"][0]["nbar"].get<double>() == doctest::Approx(0.25));
}

TEST_CASE("outputs are written and numbers round-trip") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);

  const auto dir = std::filesystem::temp_directory_path() / "cvcqd_runner_test";
  std::filesystem::remove_all(dir);
  ScenarioConfig cfg = parse_config(R"({"trials": 2, "dump_eve_log": true,
                                       "attack": {"kind": "intercept-resend"}})");
  write_outputs(run_batch(cfg), dir.string());
  for (const char* f : {"transcript.jsonl", "metrics.csv", "summary.json", "eve_log.jsonl"}) {
    INFO(f);
    CHECK(std::filesystem::exists(dir / f));
  }
  std::ifstream in(dir / "summary.json");
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(nlohmann::json::parse(ss.str()).is_object());
  std::filesystem::remove_all(dir);
}

}  // TEST_SUITE
