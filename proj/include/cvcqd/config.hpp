#pragma once

// Scenario configuration for the simulator front end. JSON with a strict
// schema: every object rejects keys it does not know.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cvcqd/adversary.hpp"
#include "cvcqd/cqd.hpp"
#include "cvcqd/smp.hpp"

namespace cvcqd {

// Any validation failure of user input; maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Protocol { Cqd, Smp2, SmpN };
const char* to_string(Protocol p);

struct WealthSpec {
  std::string mode = "random";  // random | equal | fixed
  double low = 0.0;
  double high = 10.0;
  std::size_t n_parties = 3;
  std::vector<double> values;
};

struct CapacitySpec {
  std::vector<double> r_grid{0.0, 0.5, 1.0, 1.5};
  std::optional<double> sigma;  // absent: sigma^2 = e^{-2r}/4 at each r
};

struct SweepSpec {
  std::string param;
  std::vector<double> grid;
};

struct ScenarioConfig {
  Protocol protocol = Protocol::Cqd;
  std::uint64_t seed = 1;
  std::size_t trials = 1;
  std::size_t workers = 0;  // 0: hardware concurrency
  std::size_t transcript_trials = 1;
  CqdParams cqd;
  SmpParams smp;
  WealthSpec wealth;
  AttackSpec attack;
  std::vector<AttackKind> attack_sweep;  // empty: none + full catalog
  CapacitySpec capacity;
  std::optional<SweepSpec> sweep;
  bool dump_eve_log = false;

  // Copies the shared physical fields (r, channel, thresholds...) from the
  // CQD block into the SMP block.
  void sync();
  void validate() const;  // throws ConfigError
};

ScenarioConfig parse_config(const std::string& text);
ScenarioConfig load_config(const std::string& path);
std::string preset_path(const std::string& name);
std::vector<std::string> sweepable_params();
// Sets a recognized numeric field; throws ConfigError for unknown names.
void apply_param(ScenarioConfig& cfg, const std::string& name, double value);

}  // namespace cvcqd
