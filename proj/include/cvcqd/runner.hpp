#pragma once

// Batch execution behind the command line: seeded trials on a worker pool,
// merged in trial order so outputs are byte-identical for a given config.

#include <string>

#include "cvcqd/config.hpp"
#include "json.hpp"

namespace cvcqd {

struct BatchOutput {
  std::string transcript_jsonl;
  std::string metrics_csv;
  nlohmann::json summary;
  std::string eve_log_jsonl;  // empty unless dump_eve_log
};

BatchOutput run_batch(const ScenarioConfig& cfg);
BatchOutput run_sweep(const ScenarioConfig& cfg, const SweepSpec& sweep);
BatchOutput run_attack_sweep(const ScenarioConfig& cfg);
BatchOutput capacity_table(const ScenarioConfig& cfg);

// transcript.jsonl, metrics.csv, summary.json (and eve_log.jsonl) in `dir`.
void write_outputs(const BatchOutput& out, const std::string& dir);

// Shortest round-trip decimal form.
std::string format_double(double v);

}  // namespace cvcqd
