#include "cvcqd/runner.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <mutex>
#include <thread>
#include <vector>

#include "cvcqd/metrics.hpp"

namespace cvcqd {

namespace {

constexpr const char* kSchemaCqd = "# schema: cvcqd-cqd-trials/1";
constexpr const char* kSchemaSmp2 = "# schema: cvcqd-smp2-trials/1";
constexpr const char* kSchemaSmpN = "# schema: cvcqd-smpn-trials/1";
constexpr const char* kSchemaSweep = "# schema: cvcqd-sweep/1";
constexpr const char* kSchemaAttack = "# schema: cvcqd-attack-sweep/1";
constexpr const char* kSchemaCapacity = "# schema: cvcqd-capacity/1";

std::string cell(double v) { return std::isfinite(v) ? format_double(v) : ""; }

template <class F>
void parallel_for(std::size_t n, std::size_t workers, F&& body) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          next.store(n);
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::vector<double> draw_wealth(const WealthSpec& w, std::size_t n, Rng& rng) {
  if (w.mode == "fixed") return w.values;
  std::vector<double> out(n);
  if (w.mode == "equal") {
    std::fill(out.begin(), out.end(), w.low + (w.high - w.low) * rng.uniform());
  } else {
    for (auto& v : out) v = w.low + (w.high - w.low) * rng.uniform();
  }
  return out;
}

std::size_t party_count(const ScenarioConfig& cfg) {
  if (cfg.protocol == Protocol::Smp2) return 2;
  return cfg.wealth.mode == "fixed" ? cfg.wealth.values.size() : cfg.wealth.n_parties;
}

struct TrialData {
  bool detected = false;
  bool aborted = false;
  std::string csv;
  std::string transcript;
  std::string eve_log;

  std::vector<MessageOutcome> messages;
  std::vector<double> eve_secret;
  std::vector<std::vector<double>> eve_plain;
  std::vector<std::vector<double>> eve_public;

  std::vector<double> wealth;
  SmpVerdict verdict = SmpVerdict::None;
  double statistic = std::numeric_limits<double>::quiet_NaN();
  double target = 0.0;
  double intercepted = std::numeric_limits<double>::quiet_NaN();
};

TrialData cqd_trial(const ScenarioConfig& cfg, std::size_t t) {
  const std::uint64_t ts = mix_seed(cfg.seed, t);
  const bool record = t < cfg.transcript_trials;
  std::optional<AttackStrategy> eve;
  if (cfg.attack.kind != AttackKind::None) {
    eve.emplace(cfg.attack, PublicParams{cfg.cqd.squeezing_r, 2}, mix_seed(ts, Stream::Eve));
  }
  CqdRun run = run_cqd(cfg.cqd, ts, eve ? &*eve : nullptr, record);

  TrialData d;
  d.detected = run.detected();
  d.aborted = run.status.aborted;
  if (record) d.transcript = run.transcript.to_jsonl(t);
  d.messages = std::move(run.messages);
  if (eve) {
    for (const auto& m : d.messages) {
      const auto frame = static_cast<std::int64_t>(m.frame);
      d.eve_secret.push_back(m.truth.alice.x);
      d.eve_plain.push_back(eve->log().features(frame, false));
      d.eve_public.push_back(eve->log().features(frame, true));
    }
    if (cfg.dump_eve_log) d.eve_log = eve->log().to_jsonl(t);
  }

  std::size_t failed = 0;
  for (const auto& c : run.decoys) failed += c.pass ? 0 : 1;
  double max_err = 0.0;
  for (const auto& m : d.messages) {
    const auto& e = m.decode;
    max_err = std::max({max_err, std::abs(e.alice_error.x), std::abs(e.alice_error.p),
                        std::abs(e.bob_error.x), std::abs(e.bob_error.p)});
  }
  std::string row = std::to_string(t) + "," + (run.status.aborted ? "1" : "0") + "," +
                    run.status.reason + "," +
                    (run.status.frame >= 0 ? std::to_string(run.status.frame) : "") + "," +
                    run.status.checkpoint + "," + std::to_string(failed) + "," +
                    std::to_string(d.messages.size()) + ",";
  if (d.messages.empty()) {
    row += ",,,,,,";
  } else {
    const auto& m = d.messages.front();
    row += cell(max_err) + "," + cell(m.truth.alice.x) + "," + cell(m.truth.alice.p) + "," +
           cell(m.truth.bob.x) + "," + cell(m.truth.bob.p) + "," + cell(m.decode.X) + "," +
           cell(m.decode.P);
  }
  d.csv = row + "\n";
  return d;
}

TrialData smp_trial(const ScenarioConfig& cfg, std::size_t t) {
  const std::uint64_t ts = mix_seed(cfg.seed, t);
  const bool record = t < cfg.transcript_trials;
  Rng wealth_rng(mix_seed(ts, Stream::Messages));
  const std::size_t n = party_count(cfg);
  TrialData d;
  d.wealth = draw_wealth(cfg.wealth, n, wealth_rng);

  std::optional<AttackStrategy> eve;
  if (cfg.attack.kind != AttackKind::None) {
    eve.emplace(cfg.attack, PublicParams{cfg.smp.squeezing_r, 1}, mix_seed(ts, Stream::Eve));
  }
  AttackStrategy* tap = eve ? &*eve : nullptr;
  SmpResult res = cfg.protocol == Protocol::Smp2
                      ? run_smp2(d.wealth[0], d.wealth[1], cfg.smp, ts, tap, record)
                      : run_smp_n(d.wealth, cfg.smp, ts, tap, record);
  d.detected = res.detected();
  d.aborted = res.status.aborted;
  d.verdict = res.verdict;
  d.statistic = res.statistic;
  if (res.intercepted) d.intercepted = *res.intercepted;
  if (record) d.transcript = res.transcript.to_jsonl(t);
  if (eve && cfg.dump_eve_log) d.eve_log = eve->log().to_jsonl(t);

  const std::string hop = res.status.hop >= 0 ? std::to_string(res.status.hop) : "";
  if (cfg.protocol == Protocol::Smp2) {
    d.target = d.wealth[1] - d.wealth[0];
    d.csv = std::to_string(t) + "," + cell(d.wealth[0]) + "," + cell(d.wealth[1]) + "," +
            to_string(res.verdict) + "," + cell(res.statistic) + "," + cell(res.tau_eq) + "," +
            (res.status.aborted ? "1" : "0") + "," + hop + "," + cell(d.intercepted) + "," +
            cell(res.key) + "\n";
  } else {
    double sum = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) sum += d.wealth[i];
    d.target = sum - static_cast<double>(n - 1) * d.wealth[n - 1];
    d.csv = std::to_string(t) + "," + std::to_string(n) + "," + to_string(res.verdict) + "," +
            cell(res.statistic) + "," + cell(d.target) + "," +
            cell(std::abs(res.statistic - d.target)) + "," + (res.status.aborted ? "1" : "0") +
            "," + hop + "\n";
  }
  return d;
}

json mi_json(const std::vector<double>& secret, const std::vector<std::vector<double>>& obs) {
  if (secret.size() < kMinMiSamples) return nullptr;
  // Keep rows with the dominant feature width (aborted frames can be shorter).
  const std::size_t width = obs.front().size();
  std::vector<double> s;
  std::vector<std::vector<double>> o;
  for (std::size_t i = 0; i < secret.size(); ++i) {
    if (obs[i].size() != width) continue;
    s.push_back(secret[i]);
    o.push_back(obs[i]);
  }
  if (s.size() < kMinMiSamples) return nullptr;
  const MiEstimate e = empirical_mi(s, o);
  return json{{"bits", e.bits}, {"saturated", e.saturated}, {"samples", e.samples}};
}

double capacity_for(const ScenarioConfig& cfg, double r) {
  const double sigma = cfg.capacity.sigma ? *cfg.capacity.sigma : std::sqrt(std::exp(-2.0 * r) / 4.0);
  return dense_coding_capacity_nats({r, sigma});
}

json summarize_cqd(const ScenarioConfig& cfg, const std::vector<TrialData>& trials) {
  std::size_t detected = 0;
  std::size_t aborted = 0;
  double max_err = 0.0;
  double sq = 0.0;
  std::size_t decoded = 0;
  std::vector<double> ref;
  std::vector<double> bob_secret;
  std::vector<std::vector<double>> bob_obs;
  std::vector<double> eve_secret;
  std::vector<std::vector<double>> eve_plain;
  std::vector<std::vector<double>> eve_public;
  for (const auto& d : trials) {
    detected += d.detected ? 1 : 0;
    aborted += d.aborted ? 1 : 0;
    for (const auto& m : d.messages) {
      const auto& e = m.decode;
      max_err = std::max({max_err, std::abs(e.alice_error.x), std::abs(e.alice_error.p),
                          std::abs(e.bob_error.x), std::abs(e.bob_error.p)});
      sq += 0.5 * (e.alice_error.x * e.alice_error.x + e.alice_error.p * e.alice_error.p);
      ++decoded;
      ref.push_back(m.reference.x_mu);
      bob_secret.push_back(m.truth.alice.x);
      bob_obs.push_back({e.alice_estimate.x});
    }
    eve_secret.insert(eve_secret.end(), d.eve_secret.begin(), d.eve_secret.end());
    eve_plain.insert(eve_plain.end(), d.eve_plain.begin(), d.eve_plain.end());
    eve_public.insert(eve_public.end(), d.eve_public.begin(), d.eve_public.end());
  }
  const Proportion p = wilson_interval(detected, trials.size());

  json s;
  s["protocol"] = "cqd";
  s["seed"] = cfg.seed;
  s["trials"] = trials.size();
  s["attack"] = to_string(cfg.attack.kind);
  s["charlie"] = to_string(cfg.cqd.charlie);
  s["squeezing_r"] = cfg.cqd.squeezing_r;
  s["kappa"] = cfg.cqd.kappa;
  s["detected"] = detected;
  s["aborted"] = aborted;
  s["detection"] = {{"p", p.p}, {"lo", p.lo}, {"hi", p.hi}};
  s["decoded_messages"] = decoded;
  s["max_abs_error"] = decoded ? json(max_err) : json(nullptr);
  s["mse_alice"] = decoded ? json(sq / static_cast<double>(decoded)) : json(nullptr);
  if (ref.size() >= 2) {
    double mean = 0.0;
    for (double v : ref) mean += v;
    mean /= static_cast<double>(ref.size());
    double var = 0.0;
    for (double v : ref) var += (v - mean) * (v - mean);
    var /= static_cast<double>(ref.size() - 1);
    s["reference_mean_x"] = mean;
    s["reference_var_x"] = var;
  } else {
    s["reference_mean_x"] = nullptr;
    s["reference_var_x"] = nullptr;
  }
  s["reference_var_expected"] = std::exp(-2.0 * cfg.cqd.squeezing_r) / 4.0;
  s["capacity_nats"] = capacity_for(cfg, cfg.cqd.squeezing_r);
  s["bob_mi"] = mi_json(bob_secret, bob_obs);
  s["eve_mi"] = eve_secret.empty() ? json(nullptr) : mi_json(eve_secret, eve_plain);
  s["eve_mi_with_broadcasts"] =
      eve_secret.empty() ? json(nullptr) : mi_json(eve_secret, eve_public);
  return s;
}

json summarize_smp(const ScenarioConfig& cfg, const std::vector<TrialData>& trials) {
  std::size_t detected = 0;
  std::size_t aborted = 0;
  std::size_t completed = 0;
  double max_err = 0.0;
  std::size_t sign_checked = 0;
  std::size_t sign_ok = 0;
  std::size_t equal_inputs = 0;
  std::size_t equal_verdicts = 0;
  std::map<std::string, std::size_t> counts;
  for (const auto& d : trials) {
    detected += d.detected ? 1 : 0;
    aborted += d.aborted ? 1 : 0;
    ++counts[to_string(d.verdict)];
    if (!std::isfinite(d.statistic)) continue;
    ++completed;
    max_err = std::max(max_err, std::abs(d.statistic - d.target));
    const bool all_equal =
        std::all_of(d.wealth.begin(), d.wealth.end(), [&](double w) { return w == d.wealth[0]; });
    if (all_equal) {
      ++equal_inputs;
      if (d.verdict == SmpVerdict::Equal || d.verdict == SmpVerdict::AllEqual) ++equal_verdicts;
    }
    if (cfg.protocol == Protocol::Smp2 && std::abs(d.target) >= 1.0) {
      ++sign_checked;
      if ((d.statistic > 0.0) == (d.target > 0.0)) ++sign_ok;
    }
  }
  const Proportion p = wilson_interval(detected, trials.size());
  const std::size_t n = party_count(cfg);

  json s;
  s["protocol"] = to_string(cfg.protocol);
  s["seed"] = cfg.seed;
  s["trials"] = trials.size();
  s["n_parties"] = n;
  s["attack"] = to_string(cfg.attack.kind);
  s["detected"] = detected;
  s["aborted"] = aborted;
  s["detection"] = {{"p", p.p}, {"lo", p.lo}, {"hi", p.hi}};
  s["completed"] = completed;
  s["tau_eq"] = cfg.smp.tau_eq > 0.0 ? cfg.smp.tau_eq : smp_tau_eq(cfg.smp, n);
  s["residual_variance"] = smp_residual_variance(cfg.smp, n);
  s["max_abs_error"] = completed ? json(max_err) : json(nullptr);
  s["sign_checked"] = sign_checked;
  s["sign_correct_rate"] =
      sign_checked ? json(static_cast<double>(sign_ok) / static_cast<double>(sign_checked))
                   : json(nullptr);
  s["equal_inputs"] = equal_inputs;
  s["equal_verdict_rate"] =
      equal_inputs ? json(static_cast<double>(equal_verdicts) / static_cast<double>(equal_inputs))
                   : json(nullptr);
  s["verdicts"] = counts;
  return s;
}

const char* trial_header(Protocol p) {
  switch (p) {
    case Protocol::Cqd:
      return "trial,aborted,reason,frame,checkpoint,decoys_failed,messages,max_abs_error,"
             "x_a,p_a,x_b,p_b,X,P\n";
    case Protocol::Smp2:
      return "trial,x_a,x_b,verdict,statistic,tau_eq,aborted,hop,intercepted,key\n";
    case Protocol::SmpN:
      return "trial,n,verdict,statistic,closed_form,abs_error,aborted,hop\n";
  }
  return "\n";
}

const char* trial_schema(Protocol p) {
  switch (p) {
    case Protocol::Cqd: return kSchemaCqd;
    case Protocol::Smp2: return kSchemaSmp2;
    case Protocol::SmpN: return kSchemaSmpN;
  }
  return kSchemaCqd;
}

std::vector<std::string> sweep_columns(Protocol p) {
  if (p == Protocol::Cqd) {
    return {"detection_p", "max_abs_error", "mse_alice", "reference_var_x",
            "reference_var_expected", "capacity_nats", "bob_mi_bits", "eve_mi_bits",
            "eve_mi_bits_with_broadcasts"};
  }
  return {"detection_p", "max_abs_error", "tau_eq", "sign_correct_rate", "equal_verdict_rate"};
}

std::string sweep_cells(const json& s, Protocol p) {
  auto get = [&](const json& v) -> std::string {
    if (v.is_null()) return "";
    return cell(v.get<double>());
  };
  auto mi = [&](const char* key) -> std::string {
    const json& v = s.at(key);
    return v.is_null() ? "" : cell(v.at("bits").get<double>());
  };
  std::string out = get(s.at("detection").at("p"));
  out += "," + get(s.at("max_abs_error"));
  if (p == Protocol::Cqd) {
    out += "," + get(s.at("mse_alice")) + "," + get(s.at("reference_var_x")) + "," +
           get(s.at("reference_var_expected")) + "," + get(s.at("capacity_nats")) + "," +
           mi("bob_mi") + "," + mi("eve_mi") + "," + mi("eve_mi_with_broadcasts");
  } else {
    out += "," + get(s.at("tau_eq")) + "," + get(s.at("sign_correct_rate")) + "," +
           get(s.at("equal_verdict_rate"));
  }
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

BatchOutput run_batch(const ScenarioConfig& cfg) {
  cfg.validate();
  std::vector<TrialData> trials(cfg.trials);
  parallel_for(cfg.trials, cfg.workers, [&](std::size_t t) {
    trials[t] = cfg.protocol == Protocol::Cqd ? cqd_trial(cfg, t) : smp_trial(cfg, t);
  });

  BatchOutput out;
  out.metrics_csv = std::string(trial_schema(cfg.protocol)) + "\n" + trial_header(cfg.protocol);
  for (const auto& d : trials) {
    out.metrics_csv += d.csv;
    out.transcript_jsonl += d.transcript;
    out.eve_log_jsonl += d.eve_log;
  }
  out.summary = cfg.protocol == Protocol::Cqd ? summarize_cqd(cfg, trials)
                                              : summarize_smp(cfg, trials);
  return out;
}

BatchOutput run_sweep(const ScenarioConfig& cfg, const SweepSpec& sweep) {
  if (sweep.grid.empty()) throw ConfigError("sweep grid is empty");
  {
    ScenarioConfig probe = cfg;
    apply_param(probe, sweep.param, sweep.grid.front());
  }
  BatchOutput out;
  out.metrics_csv = std::string(kSchemaSweep) + "\nparam,value";
  for (const auto& c : sweep_columns(cfg.protocol)) out.metrics_csv += "," + c;
  out.metrics_csv += "\n";
  out.summary = {{"param", sweep.param}, {"points", json::array()}};
  for (double v : sweep.grid) {
    ScenarioConfig point = cfg;
    apply_param(point, sweep.param, v);
    point.sweep.reset();
    point.validate();
    const BatchOutput b = run_batch(point);
    out.metrics_csv +=
        sweep.param + "," + format_double(v) + "," + sweep_cells(b.summary, cfg.protocol) + "\n";
    out.transcript_jsonl += b.transcript_jsonl;
    out.eve_log_jsonl += b.eve_log_jsonl;
    json entry = b.summary;
    entry["value"] = v;
    out.summary["points"].push_back(entry);
  }
  return out;
}

BatchOutput run_attack_sweep(const ScenarioConfig& cfg) {
  std::vector<AttackKind> kinds = cfg.attack_sweep;
  if (kinds.empty()) {
    kinds.push_back(AttackKind::None);
    const auto& cat = attack_catalog();
    kinds.insert(kinds.end(), cat.begin(), cat.end());
  }
  BatchOutput out;
  out.metrics_csv = std::string(kSchemaAttack) +
                    "\nattack,trials,detected,p_detect,ci_lo,ci_hi,eve_mi_bits,"
                    "eve_mi_bits_with_broadcasts\n";
  out.summary = {{"attacks", json::array()}};
  for (AttackKind kind : kinds) {
    ScenarioConfig point = cfg;
    point.attack.kind = kind;
    const BatchOutput b = run_batch(point);
    const json& s = b.summary;
    auto mi = [&](const char* key) -> std::string {
      if (!s.contains(key) || s.at(key).is_null()) return "";
      return cell(s.at(key).at("bits").get<double>());
    };
    out.metrics_csv += std::string(to_string(kind)) + "," + std::to_string(point.trials) + "," +
                       std::to_string(s.at("detected").get<std::size_t>()) + "," +
                       cell(s.at("detection").at("p").get<double>()) + "," +
                       cell(s.at("detection").at("lo").get<double>()) + "," +
                       cell(s.at("detection").at("hi").get<double>()) + "," + mi("eve_mi") + "," +
                       mi("eve_mi_with_broadcasts") + "\n";
    out.transcript_jsonl += b.transcript_jsonl;
    out.eve_log_jsonl += b.eve_log_jsonl;
    out.summary["attacks"].push_back(s);
  }
  return out;
}

BatchOutput capacity_table(const ScenarioConfig& cfg) {
  cfg.validate();
  BatchOutput out;
  out.metrics_csv = std::string(kSchemaCapacity) + "\nr,sigma,nbar,capacity_nats\n";
  json rows = json::array();
  bool increasing = true;
  double prev = -std::numeric_limits<double>::infinity();
  for (double r : cfg.capacity.r_grid) {
    const double sigma =
        cfg.capacity.sigma ? *cfg.capacity.sigma : std::sqrt(std::exp(-2.0 * r) / 4.0);
    const CapacityParams p{r, sigma};
    const double c = dense_coding_capacity_nats(p);
    increasing = increasing && c > prev;
    prev = c;
    out.metrics_csv += format_double(r) + "," + format_double(sigma) + "," +
                       format_double(p.nbar()) + "," + format_double(c) + "\n";
    rows.push_back({{"r", r}, {"sigma", sigma}, {"nbar", p.nbar()}, {"capacity_nats", c}});
  }
  out.summary = {{"rows", rows}, {"strictly_increasing", increasing}};
  return out;
}

void write_outputs(const BatchOutput& out, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto write = [&](const char* name, const std::string& body) {
    std::ofstream f(fs::path(dir) / name, std::ios::binary);
    if (!f) throw std::runtime_error(std::string("cannot write ") + name + " in " + dir);
    f << body;
  };
  write("transcript.jsonl", out.transcript_jsonl);
  write("metrics.csv", out.metrics_csv);
  write("summary.json", out.summary.dump(2) + "\n");
  if (!out.eve_log_jsonl.empty()) write("eve_log.jsonl", out.eve_log_jsonl);
}

}  // namespace cvcqd
