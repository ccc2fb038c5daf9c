// cvcqd_sim: batch front end for the CQD and SMP simulators.
//
//   cvcqd_sim run            --preset detection --out results/
//   cvcqd_sim sweep          --config cfg.json --param kappa --grid 0,0.5,1
//   cvcqd_sim attack-sweep   --preset detection --trials 200
//   cvcqd_sim capacity-table --preset capacity_table
//
// Exit codes: 0 ok, 2 bad input, 3 internal invariant violated.

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cvcqd/config.hpp"
#include "cvcqd/errors.hpp"
#include "cvcqd/runner.hpp"

namespace {

struct Common {
  std::string config;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::optional<std::size_t> workers;
  std::string out = "out";
};

void add_common(CLI::App* sub, Common& c) {
  auto* cfg = sub->add_option("--config", c.config, "scenario config (JSON)");
  auto* pre = sub->add_option("--preset", c.preset, "named preset shipped in presets/");
  cfg->excludes(pre);
  sub->add_option("--seed", c.seed, "override the master seed");
  sub->add_option("--trials", c.trials, "override the trial count");
  sub->add_option("--workers", c.workers, "worker threads (0: all cores)");
  sub->add_option("--out", c.out, "output directory")->capture_default_str();
}

cvcqd::ScenarioConfig load(const Common& c) {
  if (c.config.empty() && c.preset.empty()) {
    throw cvcqd::ConfigError("one of --config or --preset is required");
  }
  const std::string path = c.config.empty() ? cvcqd::preset_path(c.preset) : c.config;
  cvcqd::ScenarioConfig cfg = cvcqd::load_config(path);
  if (c.seed) cfg.seed = *c.seed;
  if (c.trials) cfg.trials = *c.trials;
  if (c.workers) cfg.workers = *c.workers;
  cfg.validate();
  return cfg;
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.find_first_not_of(" \t") == std::string::npos) continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || tok.find_first_not_of(" \t", used) != std::string::npos) {
      throw cvcqd::ConfigError("--grid: '" + tok + "' is not a number");
    }
    out.push_back(v);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continuous-variable controlled dialogue and millionaire simulator"};
  app.require_subcommand(1);

  Common run_opts, sweep_opts, attack_opts, cap_opts;
  auto* run = app.add_subcommand("run", "run the configured trials");
  add_common(run, run_opts);

  auto* sweep = app.add_subcommand("sweep", "re-run the batch across a parameter grid");
  add_common(sweep, sweep_opts);
  std::string param;
  std::string grid;
  sweep->add_option("--param", param, "numeric field to sweep");
  sweep->add_option("--grid", grid, "comma-separated values");

  auto* attack = app.add_subcommand("attack-sweep", "detection and leakage per attack kind");
  add_common(attack, attack_opts);
  std::vector<std::string> kinds;
  attack->add_option("--attacks", kinds, "attack kinds (default: none + catalog)")->delimiter(',');

  auto* cap = app.add_subcommand("capacity-table", "closed-form capacity across r");
  add_common(cap, cap_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    cvcqd::BatchOutput out;
    std::string dir;
    if (run->parsed()) {
      out = cvcqd::run_batch(load(run_opts));
      dir = run_opts.out;
    } else if (sweep->parsed()) {
      const cvcqd::ScenarioConfig cfg = load(sweep_opts);
      cvcqd::SweepSpec spec;
      if (cfg.sweep) spec = *cfg.sweep;
      if (!param.empty()) spec.param = param;
      if (sweep->count("--grid") > 0) spec.grid = parse_grid(grid);
      if (spec.param.empty()) throw cvcqd::ConfigError("sweep needs --param or a config sweep block");
      out = cvcqd::run_sweep(cfg, spec);
      dir = sweep_opts.out;
    } else if (attack->parsed()) {
      cvcqd::ScenarioConfig cfg = load(attack_opts);
      if (!kinds.empty()) {
        cfg.attack_sweep.clear();
        for (const auto& k : kinds) cfg.attack_sweep.push_back(cvcqd::parse_attack_kind(k));
      }
      out = cvcqd::run_attack_sweep(cfg);
      dir = attack_opts.out;
    } else {
      out = cvcqd::capacity_table(load(cap_opts));
      dir = cap_opts.out;
    }
    cvcqd::write_outputs(out, dir);
    std::cout << out.summary.dump(2) << "\n";
    return 0;
  } catch (const cvcqd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 2;
  } catch (const cvcqd::DomainError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 2;
  } catch (const cvcqd::InvariantViolation& e) {
    std::cerr << "invariant violated: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
}
