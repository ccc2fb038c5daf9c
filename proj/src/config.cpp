#include "cvcqd/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#ifndef CVCQD_PRESET_DIR
#define CVCQD_PRESET_DIR "presets"
#endif

namespace cvcqd {

namespace {

// Strict view of one JSON object: remembers which keys were read so the
// leftovers can be reported.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  const json* get(const std::string& key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string at(const std::string& key) const { return path_ + "/" + key; }

  void number(const std::string& key, double& out) {
    if (const json* v = get(key)) out = as_number(*v, at(key));
  }
  void optional_number(const std::string& key, std::optional<double>& out) {
    if (const json* v = get(key)) out = as_number(*v, at(key));
  }
  template <class Int>
  void integer(const std::string& key, Int& out) {
    if (const json* v = get(key)) out = static_cast<Int>(as_unsigned(*v, at(key)));
  }
  void boolean(const std::string& key, bool& out) {
    if (const json* v = get(key)) {
      if (!v->is_boolean()) throw ConfigError("field '" + at(key) + "' must be true or false");
      out = v->get<bool>();
    }
  }
  std::optional<std::string> string(const std::string& key) {
    const json* v = get(key);
    if (v == nullptr) return std::nullopt;
    if (!v->is_string()) throw ConfigError("field '" + at(key) + "' must be a string");
    return v->get<std::string>();
  }
  std::optional<std::vector<double>> numbers(const std::string& key) {
    const json* v = get(key);
    if (v == nullptr) return std::nullopt;
    if (!v->is_array()) throw ConfigError("field '" + at(key) + "' must be an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v->size(); ++i) {
      out.push_back(as_number((*v)[i], at(key) + "/" + std::to_string(i)));
    }
    return out;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError("unknown field '" + at(key) + "'");
    }
  }

  static double as_number(const json& v, const std::string& path) {
    if (!v.is_number()) throw ConfigError("field '" + path + "' must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError("field '" + path + "' must be finite");
    return d;
  }
  static std::uint64_t as_unsigned(const json& v, const std::string& path) {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
      throw ConfigError("field '" + path + "' must be a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }

 private:
  std::string where() const { return path_.empty() ? "config" : "'" + path_ + "'"; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

Quad parse_pair(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 2) throw ConfigError("field '" + path + "' must be [x, p]");
  return {Fields::as_number(v[0], path + "/0"), Fields::as_number(v[1], path + "/1")};
}

AmpMode parse_amp(const std::string& s, const std::string& path) {
  if (s == "ideal") return AmpMode::Ideal;
  if (s == "phase-insensitive") return AmpMode::PhaseInsensitive;
  throw ConfigError("field '" + path + "' must be ideal or phase-insensitive");
}

AttackKind parse_kind(const std::string& s, const std::string& path) {
  try {
    return parse_attack_kind(s);
  } catch (const std::invalid_argument&) {
    throw ConfigError("field '" + path + "': unknown attack kind '" + s + "'");
  }
}

void parse_attack(const json& j, AttackSpec& a) {
  Fields f(j, "/attack");
  if (auto k = f.string("kind")) a.kind = parse_kind(*k, f.at("kind"));
  f.number("d", a.d);
  if (auto b = f.numbers("betas")) {
    if (b->size() != 3) throw ConfigError("field '/attack/betas' must hold three values");
    a.betas = {(*b)[0], (*b)[1], (*b)[2]};
  }
  f.number("delta", a.delta);
  if (const json* h = f.get("hops")) {
    if (!h->is_array()) throw ConfigError("field '/attack/hops' must be an array");
    a.hops.clear();
    for (std::size_t i = 0; i < h->size(); ++i) {
      a.hops.push_back(static_cast<std::size_t>(
          Fields::as_unsigned((*h)[i], "/attack/hops/" + std::to_string(i))));
    }
  }
  f.finish();
}

void parse_messages(const json& j, MessageSpec& m) {
  Fields f(j, "/messages");
  f.number("variance", m.variance);
  f.optional_number("bob_variance", m.bob_variance);
  f.integer("bits", m.quantizer.bits);
  f.number("range", m.quantizer.range);
  if (const json* fx = f.get("fixed")) {
    Fields g(*fx, "/messages/fixed");
    DialogueMessage dm;
    if (const json* a = g.get("alice")) dm.alice = parse_pair(*a, g.at("alice"));
    if (const json* b = g.get("bob")) dm.bob = parse_pair(*b, g.at("bob"));
    g.finish();
    m.fixed = dm;
  }
  f.finish();
}

void parse_wealth(const json& j, WealthSpec& w) {
  Fields f(j, "/wealth");
  if (auto m = f.string("mode")) w.mode = *m;
  f.number("low", w.low);
  f.number("high", w.high);
  f.integer("n_parties", w.n_parties);
  if (auto v = f.numbers("values")) w.values = *v;
  f.finish();
}

std::string line_diagnostic(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < text.size() && i + 1 < byte; ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace

const char* to_string(Protocol p) {
  switch (p) {
    case Protocol::Cqd: return "cqd";
    case Protocol::Smp2: return "smp2";
    case Protocol::SmpN: return "smpn";
  }
  return "cqd";
}

void ScenarioConfig::sync() {
  smp.squeezing_r = cqd.squeezing_r;
  smp.channel = cqd.channel;
  smp.threshold_c = cqd.threshold_c;
  smp.schedule_variance = cqd.schedule_variance;
  smp.enforce_abort = cqd.enforce_abort;
}

void ScenarioConfig::validate() const {
  try {
    cqd.validate();
    smp.validate();
    attack.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (trials == 0) throw ConfigError("trials must be >= 1");
  if (wealth.mode != "random" && wealth.mode != "equal" && wealth.mode != "fixed") {
    throw ConfigError("wealth.mode must be random, equal or fixed");
  }
  if (!(wealth.high >= wealth.low)) throw ConfigError("wealth.high must be >= wealth.low");
  if (protocol == Protocol::SmpN) {
    const std::size_t n = wealth.mode == "fixed" ? wealth.values.size() : wealth.n_parties;
    if (n < 3) throw ConfigError("smpn needs at least 3 parties");
  }
  if (protocol == Protocol::Smp2 && wealth.mode == "fixed" && wealth.values.size() != 2) {
    throw ConfigError("smp2 fixed wealth needs exactly [x_A, x_B]");
  }
  for (double r : capacity.r_grid) {
    if (!(r >= 0.0)) throw ConfigError("capacity.r_grid values must be >= 0");
  }
  if (capacity.sigma && !(*capacity.sigma >= 0.0)) throw ConfigError("capacity.sigma must be >= 0");
  if (sweep) {
    if (sweep->grid.empty()) throw ConfigError("sweep grid is empty");
    const auto names = sweepable_params();
    if (std::find(names.begin(), names.end(), sweep->param) == names.end()) {
      throw ConfigError("unknown sweep parameter '" + sweep->param + "'");
    }
  }
}

ScenarioConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed JSON at " + line_diagnostic(text, e.byte) + ": " + e.what());
  }

  ScenarioConfig cfg;
  Fields f(j, "");
  f.get("description");
  if (auto p = f.string("protocol")) {
    if (*p == "cqd") {
      cfg.protocol = Protocol::Cqd;
    } else if (*p == "smp2") {
      cfg.protocol = Protocol::Smp2;
    } else if (*p == "smpn") {
      cfg.protocol = Protocol::SmpN;
    } else {
      throw ConfigError("field '/protocol' must be cqd, smp2 or smpn");
    }
  }
  f.integer("seed", cfg.seed);
  f.integer("trials", cfg.trials);
  f.integer("workers", cfg.workers);
  f.integer("transcript_trials", cfg.transcript_trials);

  CqdParams& c = cfg.cqd;
  f.number("squeezing_r", c.squeezing_r);
  if (const json* ch = f.get("channel")) {
    Fields g(*ch, "/channel");
    g.number("eta", c.channel.eta);
    g.number("epsilon", c.channel.epsilon);
    if (auto a = g.string("amp_mode")) c.channel.amp = parse_amp(*a, g.at("amp_mode"));
    g.finish();
  }
  if (const json* d = f.get("decoys")) {
    Fields g(*d, "/decoys");
    g.integer("cb", c.decoys[0]);
    g.integer("ab", c.decoys[1]);
    g.integer("abo", c.decoys[2]);
    g.finish();
  }
  f.integer("decoys_per_hop", cfg.smp.decoys_per_hop);
  f.integer("n_message", c.n_message);
  f.number("threshold_c", c.threshold_c);
  f.number("schedule_variance", c.schedule_variance);
  if (const json* o = f.get("charlie_offsets")) {
    const Quad q = parse_pair(*o, "/charlie_offsets");
    c.offset_x = q.x;
    c.offset_y = q.p;
  }
  if (auto r = f.string("reference")) {
    if (*r == "shared") {
      c.reference = ReferenceMode::Shared;
    } else if (*r == "fresh") {
      c.reference = ReferenceMode::Fresh;
    } else {
      throw ConfigError("field '/reference' must be shared or fresh");
    }
  }
  f.boolean("reapply_offsets", c.reapply_offsets);
  f.number("kappa", c.kappa);
  if (auto r = f.string("reveal")) {
    if (*r != "private" && *r != "public") {
      throw ConfigError("field '/reveal' must be private or public");
    }
    c.reveal_public = *r == "public";
  }
  f.boolean("enforce_abort", c.enforce_abort);
  if (const json* m = f.get("messages")) parse_messages(*m, c.messages);
  if (const json* w = f.get("wealth")) parse_wealth(*w, cfg.wealth);
  f.number("hardening_key_variance", cfg.smp.hardening_key_variance);
  f.optional_number("hardening_key", cfg.smp.hardening_key);
  f.boolean("malicious_intercept", cfg.smp.malicious_intercept);
  f.number("tau_eq", cfg.smp.tau_eq);
  f.boolean("debug_statistic", cfg.smp.debug_statistic);
  if (const json* a = f.get("attack")) parse_attack(*a, cfg.attack);
  if (const json* s = f.get("attack_sweep")) {
    if (!s->is_array()) throw ConfigError("field '/attack_sweep' must be an array of names");
    for (std::size_t i = 0; i < s->size(); ++i) {
      const std::string path = "/attack_sweep/" + std::to_string(i);
      if (!(*s)[i].is_string()) throw ConfigError("field '" + path + "' must be a string");
      cfg.attack_sweep.push_back(parse_kind((*s)[i].get<std::string>(), path));
    }
  }
  if (auto ch = f.string("charlie")) {
    if (*ch == "honest") {
      c.charlie = CharlieBehavior::Honest;
    } else if (*ch == "aux-mode-swap") {
      c.charlie = CharlieBehavior::AuxModeSwap;
    } else if (*ch == "separable-state") {
      c.charlie = CharlieBehavior::SeparableState;
    } else {
      throw ConfigError("field '/charlie' must be honest, aux-mode-swap or separable-state");
    }
  }
  if (const json* cap = f.get("capacity")) {
    Fields g(*cap, "/capacity");
    if (auto grid = g.numbers("r_grid")) cfg.capacity.r_grid = *grid;
    g.optional_number("sigma", cfg.capacity.sigma);
    g.finish();
  }
  if (const json* sw = f.get("sweep")) {
    Fields g(*sw, "/sweep");
    SweepSpec spec;
    if (auto p = g.string("param")) spec.param = *p;
    if (auto grid = g.numbers("grid")) spec.grid = *grid;
    g.finish();
    cfg.sweep = spec;
  }
  f.boolean("dump_eve_log", cfg.dump_eve_log);
  f.finish();

  cfg.sync();
  cfg.validate();
  return cfg;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::string preset_path(const std::string& name) {
  for (char ch : name) {
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-')) {
      throw ConfigError("invalid preset name '" + name + "'");
    }
  }
  return std::string(CVCQD_PRESET_DIR) + "/" + name + ".json";
}

std::vector<std::string> sweepable_params() {
  return {"squeezing_r",  "eta",          "epsilon",       "kappa",
          "threshold_c",  "schedule_variance", "message_variance", "tau_eq",
          "hardening_key_variance", "attack_d", "attack_delta", "attack_beta1",
          "attack_beta2", "attack_beta3", "n_parties",     "offset_x",
          "offset_y",     "wealth_low",   "wealth_high"};
}

void apply_param(ScenarioConfig& cfg, const std::string& name, double value) {
  CqdParams& c = cfg.cqd;
  if (name == "squeezing_r") {
    c.squeezing_r = value;
  } else if (name == "eta") {
    c.channel.eta = value;
  } else if (name == "epsilon") {
    c.channel.epsilon = value;
  } else if (name == "kappa") {
    c.kappa = value;
  } else if (name == "threshold_c") {
    c.threshold_c = value;
  } else if (name == "schedule_variance") {
    c.schedule_variance = value;
  } else if (name == "message_variance") {
    c.messages.variance = value;
  } else if (name == "tau_eq") {
    cfg.smp.tau_eq = value;
  } else if (name == "hardening_key_variance") {
    cfg.smp.hardening_key_variance = value;
  } else if (name == "attack_d") {
    cfg.attack.d = value;
  } else if (name == "attack_delta") {
    cfg.attack.delta = value;
  } else if (name == "attack_beta1") {
    cfg.attack.betas[0] = value;
  } else if (name == "attack_beta2") {
    cfg.attack.betas[1] = value;
  } else if (name == "attack_beta3") {
    cfg.attack.betas[2] = value;
  } else if (name == "n_parties") {
    if (!(value >= 0.0) || value != std::floor(value)) {
      throw ConfigError("n_parties must be a non-negative integer");
    }
    cfg.wealth.n_parties = static_cast<std::size_t>(value);
  } else if (name == "offset_x") {
    c.offset_x = value;
  } else if (name == "offset_y") {
    c.offset_y = value;
  } else if (name == "wealth_low") {
    cfg.wealth.low = value;
  } else if (name == "wealth_high") {
    cfg.wealth.high = value;
  } else {
    throw ConfigError("unknown parameter '" + name + "'");
  }
  cfg.sync();
}

}  // namespace cvcqd
