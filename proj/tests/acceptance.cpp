// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "cvcqd/adversary.hpp"
#include "cvcqd/cqd.hpp"
#include "cvcqd/metrics.hpp"
#include "cvcqd/phase_space.hpp"
#include "cvcqd/runner.hpp"

using namespace cvcqd;
using nlohmann::json;

namespace {

enum class Mode { Batch, Sweep, Attacks, Capacity };

struct Preset {
  ScenarioConfig cfg;
  Mode mode = Mode::Batch;
};

Preset load(const std::string& name, Mode mode) {
  return {load_config(preset_path(name)), mode};
}

BatchOutput execute(const Preset& p) {
  switch (p.mode) {
    case Mode::Batch: return run_batch(p.cfg);
    case Mode::Sweep: return run_sweep(p.cfg, *p.cfg.sweep);
    case Mode::Attacks: return run_attack_sweep(p.cfg);
    case Mode::Capacity: return capacity_table(p.cfg);
  }
  return {};
}

// First execution of each preset, kept for the determinism rerun.
std::map<std::string, BatchOutput> g_first;
std::map<std::string, Mode> g_modes;

const BatchOutput& run_preset(const std::string& name, Mode mode) {
  auto it = g_first.find(name);
  if (it == g_first.end()) {
    it = g_first.emplace(name, execute(load(name, mode))).first;
    g_modes[name] = mode;
  }
  return it->second;
}

double num(const json& v) { return v.is_null() ? std::nan("") : v.get<double>(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

int g_failed = 0;

void criterion(int id, const char* name, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (budget_s > 0.0 && secs > budget_s) {
    o.pass = false;
    o.detail += " (over time budget)";
  }
  if (!o.pass) ++g_failed;
  std::printf("%s [%2d] %-34s %7.2fs  %s\n", o.pass ? "PASS" : "FAIL", id, name, secs,
              o.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// ---------------------------------------------------------------------------
// Random operation pipelines for the engine cross-check.

struct Op {
  int kind;
  std::size_t i, j;
  double a, b;
};

std::vector<Op> random_pipeline(Rng& rng, std::size_t modes) {
  const auto pick = [&](std::size_t n) {
    return static_cast<std::size_t>(rng.uniform() * static_cast<double>(n));
  };
  std::vector<Op> ops(1 + pick(10));
  for (auto& op : ops) {
    op.kind = static_cast<int>(pick(6));
    op.i = pick(modes);
    op.j = (op.i + 1 + pick(modes - 1)) % modes;
    op.a = rng.uniform();
    op.b = rng.uniform();
  }
  return ops;
}

template <class State, class Apply>
void run_ops(State& s, const std::vector<Op>& ops, Apply&& with_rng) {
  for (const auto& op : ops) {
    switch (op.kind) {
      case 0: s.displace(op.i, {2.0 * op.a - 1.0, 2.0 * op.b - 1.0}); break;
      case 1: s.two_mode_squeeze(op.i, op.j, 1.5 * op.a); break;
      case 2: s.beam_split(op.i, op.j, op.a, BeamSplitterForm::Physical); break;
      case 3: with_rng([&](auto&... r) { s.loss_channel(op.i, 0.3 + 0.7 * op.a, 0.1 * op.b, r...); }); break;
      case 4:
        with_rng([&](auto&... r) {
          s.amplify(op.i, 1.0 + op.a, AmpMode::PhaseInsensitive, r...);
        });
        break;
      case 5: with_rng([&](auto&... r) { s.add_noise(op.i, 0.5 * op.a, r...); }); break;
    }
  }
}

Outcome engine_cross_oracle() {
  constexpr std::size_t kModes = 3;
  constexpr std::size_t kSamples = 100000;
  constexpr std::size_t kDim = 2 * kModes;
  Rng meta(2024);
  double worst = 0.0;
  for (int pipeline = 0; pipeline < 20; ++pipeline) {
    const auto ops = random_pipeline(meta, kModes);

    GaussianState ens = make_vacuum(kModes);
    run_ops(ens, ops, [](auto&& f) { f(); });
    const Eigen::VectorXd mu = ens.mean();
    const Eigen::MatrixXd v = ens.cov();

    Eigen::VectorXd sum = Eigen::VectorXd::Zero(kDim);
    Eigen::MatrixXd sq = Eigen::MatrixXd::Zero(kDim, kDim);
    Rng rng(mix_seed(7, static_cast<std::uint64_t>(pipeline)));
    Eigen::VectorXd r(kDim);
    for (std::size_t n = 0; n < kSamples; ++n) {
      ShotState s = ShotState::vacuum(kModes, rng);
      run_ops(s, ops, [&](auto&& f) { f(rng); });
      for (std::size_t m = 0; m < kModes; ++m) {
        r(2 * m) = s.quad(m).x - mu(2 * m);
        r(2 * m + 1) = s.quad(m).p - mu(2 * m + 1);
      }
      sum += r;
      sq += r * r.transpose();
    }
    const double N = static_cast<double>(kSamples);
    const Eigen::VectorXd mean = sum / N;
    const Eigen::MatrixXd cov = (sq - N * mean * mean.transpose()) / (N - 1.0);
    for (std::size_t a = 0; a < kDim; ++a) {
      worst = std::max(worst, std::abs(mean(a)) / std::sqrt(v(a, a) / N));
      for (std::size_t b = a; b < kDim; ++b) {
        const double se = std::sqrt((v(a, a) * v(b, b) + v(a, b) * v(a, b)) / N);
        worst = std::max(worst, std::abs(cov(a, b) - v(a, b)) / se);
      }
    }
  }
  return {worst <= 5.0, fmt("worst deviation %.2f SE over 20 pipelines", worst)};
}

// ---------------------------------------------------------------------------
// Beam-splitter replication: record what reaches each tapped hop, then
// compose the printed 2x2 transforms by hand.

class RecordingEve : public AttackStrategy {
 public:
  using AttackStrategy::AttackStrategy;
  std::map<std::size_t, Quad> inputs;  // hop -> in-flight quadratures before coupling

  void on_transfer(FramePulse& pulse, std::size_t mode, const Hop& hop, Rng& physics) override {
    inputs[hop.index] = pulse.state.quad(mode);
    AttackStrategy::on_transfer(pulse, mode, hop, physics);
  }
};

using Mat2 = std::array<std::array<double, 2>, 2>;

Mat2 printed(double beta) {
  const double t = std::sqrt(beta), u = std::sqrt(1.0 - beta);
  return {{{t, u}, {u, t}}};
}

std::array<double, 2> apply(const Mat2& m, double first, double second) {
  return {m[0][0] * first + m[0][1] * second, m[1][0] * first + m[1][1] * second};
}

Outcome beam_splitter_replication() {
  const ScenarioConfig cfg = load_config(preset_path("bs_replication"));
  Rng meta(cfg.seed);
  double worst = 0.0;
  std::size_t checked = 0;
  for (std::size_t t = 0; t < 100; ++t) {
    AttackSpec spec = cfg.attack;
    spec.betas = {meta.uniform(), meta.uniform(), meta.uniform()};
    RecordingEve eve(spec, PublicParams{cfg.cqd.squeezing_r, 2}, mix_seed(cfg.seed, t));
    run_cqd(cfg.cqd, mix_seed(cfg.seed, 1000 + t), &eve, false);

    std::map<std::string, double> inst;
    for (const auto& r : eve.instrumentation()) inst[r.label] = r.value;
    std::map<std::string, double> rec;
    for (const auto& r : eve.log().records) rec[r.label] = r.value;
    const Quad a = eve.inputs.at(eve.hops()[0]);
    const Quad b = eve.inputs.at(eve.hops()[1]);

    // Stage 1 (a, e11) -> (a', e21); stage 2 (b, e12) -> (b', e22);
    // stage 3 (e22, e21) -> (e32, e31).
    const auto x21 = apply(printed(spec.betas[0]), a.x, inst.at("e11_x"))[1];
    const auto p21 = apply(printed(spec.betas[0]), a.p, inst.at("e11_p"))[1];
    const auto x22 = apply(printed(spec.betas[1]), b.x, inst.at("e12_x"))[1];
    const auto p22 = apply(printed(spec.betas[1]), b.p, inst.at("e12_p"))[1];
    const double x32 = apply(printed(spec.betas[2]), x22, x21)[0];
    const double p31 = apply(printed(spec.betas[2]), p22, p21)[1];

    worst = std::max({worst, std::abs(rec.at("x_e32") - x32), std::abs(rec.at("p_e31") - p31)});
    ++checked;
  }
  return {checked == 100 && worst <= 1e-9,
          fmt("max |record - oracle| = %.2e over 100 realizations", worst)};
}

}  // namespace

int main() {
  criterion(1, "decode exactness", 5.0, [] {
    const json& s = run_preset("decode_exactness", Mode::Batch).summary;
    const double err = num(s["max_abs_error"]);
    const bool ok = s["decoded_messages"] == 1000 && err <= 1e-9;
    return Outcome{ok, fmt("max error %.2e over 1000 messages", err)};
  });

  criterion(2, "squeezed reference variance", 10.0, [] {
    const json& s = run_preset("reference_variance", Mode::Sweep).summary;
    double worst = 0.0;
    for (const auto& pt : s["points"]) {
      worst = std::max(worst, std::abs(num(pt["reference_var_x"]) /
                                           num(pt["reference_var_expected"]) - 1.0));
    }
    return Outcome{s["points"].size() == 4 && worst <= 0.05,
                   fmt("worst relative deviation %.4f", worst)};
  });

  criterion(3, "engine cross-oracle", 0.0, engine_cross_oracle);

  criterion(4, "two-party comparison", 0.0, [] {
    const json& ideal = run_preset("smp2_ideal", Mode::Batch).summary;
    const json& phys = run_preset("smp2_physical", Mode::Batch).summary;
    const json& eq = run_preset("smp2_equal", Mode::Batch).summary;
    const double err = num(ideal["max_abs_error"]);
    // Aborted runs count as wrong answers.
    const double sign = num(phys["sign_correct_rate"]) * num(phys["sign_checked"]) /
                        (num(phys["sign_checked"]) + num(phys["aborted"]));
    const double equal = num(eq["equal_verdict_rate"]) * num(eq["equal_inputs"]) / num(eq["trials"]);
    const bool ok = ideal["completed"] == 1000 && err <= 1e-9 && sign >= 0.99 && equal >= 0.99;
    return Outcome{ok, fmt("ideal error %.2e", err) + fmt(", sign rate %.4f", sign) +
                           fmt(", equal rate %.4f", equal)};
  });

  criterion(5, "multiparty statistic", 0.0, [] {
    const json& s = run_preset("smpn_identity", Mode::Sweep).summary;
    double worst = 0.0;
    for (const auto& pt : s["points"]) worst = std::max(worst, num(pt["max_abs_error"]));
    const json& fe = run_preset("smpn_false_equality", Mode::Batch).summary;
    const bool all_equal = fe["verdicts"].value("AllEqual", 0) == fe["trials"].get<int>();
    return Outcome{s["points"].size() == 6 && worst <= 1e-9 && all_equal,
                   fmt("max error %.2e for n = 3..8", worst) +
                       (all_equal ? ", (2,1,3,2) -> AllEqual" : ", (2,1,3,2) not AllEqual")};
  });

  criterion(6, "detection probabilities", 120.0, [] {
    const json& s = run_preset("detection", Mode::Attacks).summary;
    const std::map<std::string, double> floor = {{"disturbance", 0.99},
                                                 {"intercept-resend", 0.99},
                                                 {"clone-noise", 0.99},
                                                 {"beam-splitter", 0.95}};
    bool ok = true;
    std::string detail;
    std::size_t covered = 0;
    for (const auto& a : s["attacks"]) {
      const std::string kind = a["attack"];
      const double p = num(a["detection"]["p"]);
      detail += kind + "=" + fmt("%.3f", p) + " ";
      if (kind == "none") {
        ok = ok && p <= 0.01;
        ++covered;
      } else if (floor.count(kind)) {
        ok = ok && p >= floor.at(kind);
        ++covered;
      }
    }
    return Outcome{ok && covered == 5, detail};
  });

  criterion(7, "beam-splitter replication", 0.0, beam_splitter_replication);

  criterion(8, "eavesdropper ignorance", 0.0, [] {
    const json& s = run_preset("eve_ignorance", Mode::Attacks).summary;
    double worst = 0.0;
    std::size_t attacks = 0;
    for (const auto& a : s["attacks"]) {
      if (a["attack"] == "none") continue;
      ++attacks;
      for (const char* key : {"eve_mi", "eve_mi_with_broadcasts"}) {
        if (!a[key].is_null()) worst = std::max(worst, num(a[key]["bits"]));
      }
    }
    return Outcome{attacks == attack_catalog().size() && worst <= 0.05,
                   fmt("max MI %.4f bits over the catalog", worst)};
  });

  criterion(9, "cryptographic switch", 0.0, [] {
    const ScenarioConfig cfg = load_config(preset_path("switch_curve"));
    const json& s = run_preset("switch_curve", Mode::Sweep).summary;
    const auto& pts = s["points"];
    bool ok = pts.size() == 5;
    for (std::size_t i = 1; i < pts.size(); ++i) {
      ok = ok && num(pts[i]["mse_alice"]) <= num(pts[i - 1]["mse_alice"]);
      ok = ok && num(pts[i]["bob_mi"]["bits"]) >= num(pts[i - 1]["bob_mi"]["bits"]);
    }
    const double mse0 = num(pts.front()["mse_alice"]);
    const double mse1 = num(pts.back()["mse_alice"]);
    const double target = 2.0 * cfg.cqd.schedule_variance;
    ok = ok && mse1 <= 1e-9 && std::abs(mse0 / target - 1.0) <= 0.1;
    return Outcome{ok, fmt("MSE(0) = %.2f", mse0) + fmt(" vs %.0f", target) +
                           fmt(", MSE(1) = %.1e", mse1)};
  });

  criterion(10, "closed forms", 0.0, [] {
    const double c = capacity_from_nbar_nats(1.0);
    MiParams mp;
    mp.sigma_a = mp.sigma;
    const double mi = mutual_information_ab_bits(mp);
    const json& s = run_preset("capacity_table", Mode::Capacity).summary;
    const bool inc = s["strictly_increasing"] == true && s["rows"].size() == 10;
    const bool ok = std::abs(c - std::log(3.0)) <= 1e-12 && std::abs(mi - 1.0) <= 1e-12 && inc;
    return Outcome{ok, fmt("|C(1) - ln 3| = %.1e", std::abs(c - std::log(3.0))) +
                           fmt(", |I - 1| = %.1e", std::abs(mi - 1.0)) +
                           (inc ? ", capacity increasing" : ", capacity not increasing")};
  });

  criterion(11, "determinism", 0.0, [] {
    run_preset("bs_replication", Mode::Batch);
    std::size_t same = 0;
    std::string bad;
    for (const auto& [name, first] : g_first) {
      Preset p = load(name, g_modes.at(name));
      const BatchOutput again = execute(p);
      if (again.transcript_jsonl == first.transcript_jsonl &&
          again.metrics_csv == first.metrics_csv) {
        ++same;
      } else {
        bad += " " + name;
      }
    }
    return Outcome{bad.empty() && same == g_first.size(),
                   std::to_string(same) + " presets byte-identical on rerun" +
                       (bad.empty() ? "" : "; differs:" + bad)};
  });

  std::printf("%d of 11 criteria failed\n", g_failed);
  return g_failed;
}
