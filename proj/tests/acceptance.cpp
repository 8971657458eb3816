// Prints one PASS/FAIL/SKIP line per acceptance criterion. Exits nonzero if any
// criterion fails.
//
// Environment:
//   ARITHLM_RUNS          directory holding finished runs (<runs>/<preset>/)
//   ARITHLM_ACCEPT_TRAIN  1 = train missing core runs (hours on one core)
//   ARITHLM_EXTENDED      1 = also train missing extended-tier runs

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "arithlm/amnesic.hpp"
#include "arithlm/analysis.hpp"
#include "arithlm/checkpoint.hpp"
#include "arithlm/errors.hpp"
#include "arithlm/experiments.hpp"
#include "arithlm/presets.hpp"
#include "arithlm/tasks.hpp"

using namespace arithlm;
namespace fs = std::filesystem;

namespace {

enum class Status { Pass, Fail, Skip };

struct Verdict {
  Status status;
  std::string detail;
};

Verdict pass_if(bool ok, std::string detail) { return {ok ? Status::Pass : Status::Fail, std::move(detail)}; }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool env_flag(const char* name) {
  const char* v = std::getenv(name);
  return v && std::string(v) == "1";
}

fs::path runs_root() {
  if (const char* v = std::getenv("ARITHLM_RUNS")) return v;
  return ARITHLM_DEFAULT_RUNS;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Run {
  fs::path dir;
  Json manifest;
  std::vector<MetricsRow> curve;
};

/// Finished run of `preset` under the runs root, training it when allowed.
std::optional<Run> find_run(const std::string& preset, bool extended) {
  const fs::path dir = runs_root() / preset;
  auto manifest = completed_run(dir);
  const bool allowed = env_flag("ARITHLM_ACCEPT_TRAIN") && (!extended || env_flag("ARITHLM_EXTENDED"));
  if (!manifest && allowed) {
    std::fprintf(stderr, "training %s into %s\n", preset.c_str(), dir.string().c_str());
    RunOptions opts;
    opts.log = [](const std::string& line) { std::fprintf(stderr, "%s\n", line.c_str()); };
    run_preset(find_preset(preset), 1, dir, opts);
    manifest = completed_run(dir);
  }
  if (!manifest) return std::nullopt;
  return Run{dir, *manifest, read_metrics_csv(dir / "metrics.csv")};
}

std::optional<std::size_t> first_epoch_at(const std::vector<MetricsRow>& curve, double threshold,
                                          double MetricsRow::*field = &MetricsRow::val_seq_acc) {
  for (const auto& r : curve) {
    if (r.*field >= threshold) return r.epoch;
  }
  return std::nullopt;
}

std::string missing(const std::vector<std::string>& presets) {
  std::string s = "no finished run for";
  for (const auto& p : presets) {
    if (!completed_run(runs_root() / p)) s += " " + p;
  }
  return s + " under " + runs_root().string();
}

Verdict oracles() {
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t bad = 0;
  for (std::uint32_t a = 0; a < 128; ++a) {
    for (std::uint32_t b = 0; b < 128; ++b) {
      if (oracle_add(a, b).value != a + b || oracle_mul(a, b).value != a * b) ++bad;
    }
  }
  const double secs = seconds_since(t0);
  return pass_if(bad == 0 && secs < 1.0, fmt("%zu mismatches over 16384 pairs, %.3f s", bad, secs));
}

Verdict gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::string cmd = std::string("\"") + ARITHLM_GRADIENT_TESTS + "\" > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  const double secs = seconds_since(t0);
  return pass_if(rc == 0 && secs < 60.0,
                 fmt("finite-difference suite exit %d, %.1f s", rc, secs));
}

struct Smoke {
  double seconds = 0.0;
  double val_seq = 0.0;
  std::string metrics;
};

Smoke smoke_run(const fs::path& dir) {
  fs::remove_all(dir);
  const auto t0 = std::chrono::steady_clock::now();
  RunOptions opts;
  opts.skip_analyses = true;
  const auto out = run_preset(find_preset("smoke-add"), 1, dir, opts);
  Smoke s;
  s.seconds = seconds_since(t0);
  s.val_seq = out.result.curve.back().val_seq_acc;
  s.metrics = read_file(out.paths.metrics());
  return s;
}

Verdict addition(const Smoke& smoke) {
  const bool smoke_ok = smoke.val_seq >= 0.99 && smoke.seconds < 300.0;
  std::string detail = fmt("smoke val_seq %.4f in %.0f s", smoke.val_seq, smoke.seconds);
  const auto run = find_run("add-random", false);
  if (!run) {
    if (!smoke_ok) return {Status::Fail, detail};
    return {Status::Skip, detail + "; " + missing({"add-random"})};
  }
  const auto at = first_epoch_at(run->curve, 0.995);
  const double mae = run->curve.back().mae;
  const bool ok = at && *at <= 100 && mae == 0.0;
  detail += "; add-random " +
            (at ? fmt("reached 99.5%% at epoch %zu", *at)
                : fmt("peak val_seq %.4f, never 99.5%%", run->manifest.value("best_val_seq_acc", 0.0))) +
            fmt(", final mae %.4f", mae);
  return pass_if(smoke_ok && ok, detail);
}

Verdict multiplication() {
  const auto run = find_run("mul-random", true);
  if (!run) return {Status::Skip, "extended tier; " + missing({"mul-random"})};
  const auto at = first_epoch_at(run->curve, 0.97);
  const double mae = run->curve.back().mae;
  return pass_if(at && *at <= 400 && mae <= 3.0,
                 (at ? fmt("97%% at epoch %zu", *at) : std::string("never 97%")) +
                     fmt(", final mae %.3f", mae));
}

Verdict random_output() {
  const auto run = find_run("rand-output", true);
  if (!run) return {Status::Skip, "extended tier; " + missing({"rand-output"})};
  std::optional<std::size_t> at;
  double worst_val = 0.0;
  for (const auto& r : run->curve) {
    if (!at && r.epoch <= 1000 && r.train_seq_acc >= 0.8) at = r.epoch;
    worst_val = std::max(worst_val, r.val_seq_acc);
  }
  return pass_if(at.has_value() && worst_val <= 0.01,
                 (at ? fmt("train 80%% at epoch %zu", *at) : std::string("train never 80%")) +
                     fmt(", max val_seq %.4f", worst_val));
}

Verdict extrapolation() {
  const auto vst = find_run("add-vst", false);
  const auto vsv = find_run("add-vsv", false);
  if (!vst || !vsv) return {Status::Skip, missing({"add-vst", "add-vsv"})};
  const double t = vst->curve.back().val_seq_acc, v = vsv->curve.back().val_seq_acc;
  const bool add_ok = t >= 0.99 && v >= 0.88 && v <= 0.97 && v < t;
  std::string detail = fmt("addition VS_t %.4f VS_v %.4f", t, v);
  const auto mt = find_run("mul-vst", true);
  const auto mv = find_run("mul-vsv", true);
  if (!mt || !mv) {
    if (!add_ok) return {Status::Fail, detail};
    return {Status::Skip, detail + " (addition part holds); multiplication is extended tier, " +
                              missing({"mul-vst", "mul-vsv"})};
  }
  const double a = mt->curve.back().val_seq_acc, b = mv->curve.back().val_seq_acc;
  return pass_if(add_ok && b < a, detail + fmt("; multiplication VS_t %.4f VS_v %.4f", a, b));
}

std::optional<Checkpoint> trained_addition(std::string& why) {
  const auto run = find_run("add-random", false);
  if (!run) {
    why = missing({"add-random"});
    return std::nullopt;
  }
  return load_checkpoint((run->dir / "checkpoints" / "final.ckpt").string());
}

double spread(const std::vector<double>& v) {
  return *std::max_element(v.begin(), v.end()) - *std::min_element(v.begin(), v.end());
}

Verdict correlation() {
  std::string why;
  const auto ckpt = trained_addition(why);
  if (!ckpt) return {Status::Skip, why};
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = correlation_report(ckpt->model, TaskSpec::addition());
  const double secs = seconds_since(t0);
  const auto& dv = r.dec_vs_out_v;
  const auto& dt = r.dec_vs_out_t;
  const bool v_max = std::max_element(dv.begin(), dv.end()) - dv.begin() == 2;
  const bool t_min = std::min_element(dt.begin(), dt.end()) - dt.begin() == 2;
  const double enc = spread(r.enc_vs_in_t), dec = spread(dt);
  std::string series;
  for (std::size_t i = 0; i < dv.size(); ++i) series += fmt(" %.3f/%.3f", dv[i], dt[i]);
  return pass_if(v_max && t_min && enc < 0.5 * dec && secs < 300.0,
                 "dec value/token:" + series +
                     fmt("; encoder spread %.3f vs decoder %.3f; %.0f s", enc, dec, secs));
}

Verdict amnesic() {
  std::string why;
  const auto ckpt = trained_addition(why);
  if (!ckpt) return {Status::Skip, why};
  const auto preset = find_preset("add-random");
  const auto data = build_dataset(preset, 1);
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const auto r = run_amnesic(ckpt->model, preset.task, data.split.validation_ids);
    const double secs = seconds_since(t0);
    const double rmse = r.rmse_history.front();
    return pass_if(rmse <= 0.5 && r.projected_accuracy <= 0.05 && r.control_accuracy >= 0.99 &&
                       secs < 600.0,
                   fmt("probe rmse %.3f, baseline %.4f, projected %.4f, control %.4f, %.0f s", rmse,
                       r.baseline_accuracy, r.projected_accuracy, r.control_accuracy, secs));
  } catch (const PreconditionError& e) {
    return {Status::Fail, e.what()};
  }
}

Verdict discontinuity() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto m = discontinuity_matrix();
  const double secs = seconds_since(t0);
  double worst = 0.0;
  for (const auto& row : m.cells) {
    double sum = 0.0;
    for (double v : row) sum += v;
    worst = std::max(worst, std::abs(sum - 1.0));
  }
  const double c23 = m.cells[2][3];
  return pass_if(m.cells[0][0] == 1.0 && worst <= 1e-9 && std::abs(c23 - 0.279) <= 0.005 && secs < 120.0,
                 fmt("cell(0,0) %.6f, max row error %.2e, cell(2,3) %.6f, %.2f s", m.cells[0][0], worst,
                     c23, secs));
}

Verdict ablations() {
  const std::vector<std::string> names{"reverse-order-add", "ablation-squeeze", "ablation-nope",
                                       "ablation-noattn", "ablation-noffn"};
  std::vector<Run> runs;
  for (const auto& n : names) {
    auto r = find_run(n, true);
    if (!r) return {Status::Skip, "extended tier; " + missing(names)};
    runs.push_back(std::move(*r));
  }
  auto e95 = [&](std::size_t i) { return first_epoch_at(runs[i].curve, 0.95); };
  auto final_acc = [&](std::size_t i) { return runs[i].curve.back().val_seq_acc; };
  const auto full = e95(0), squeeze = e95(1), noffn = e95(4);
  bool ok = full.has_value();
  for (std::size_t i : {2u, 3u}) {
    ok = ok && !e95(i) && runs[i].curve.size() >= 1000 && final_acc(i) <= 0.10;
  }
  ok = ok && (!squeeze || *full < *squeeze) && (!noffn || *full < *noffn);
  auto show = [](std::optional<std::size_t> e) { return e ? std::to_string(*e) : std::string("---"); };
  return pass_if(ok, "epochs to 95%: full " + show(full) + ", squeeze " + show(squeeze) + ", no-ffn " +
                         show(noffn) + fmt("; no-pe final %.4f, no-attn final %.4f", final_acc(2),
                                           final_acc(3)));
}

Verdict order_study() {
  const auto rev = find_run("reverse-order-add", true);
  const auto plain = find_run("plain-order-add", true);
  if (!rev || !plain) return {Status::Skip, "extended tier; " + missing({"reverse-order-add", "plain-order-add"})};
  const auto r = first_epoch_at(rev->curve, 0.95), p = first_epoch_at(plain->curve, 0.95);
  auto show = [](std::optional<std::size_t> e) { return e ? std::to_string(*e) : std::string("---"); };
  return pass_if(r && (!p || *r < *p), "epochs to 95%: reverse " + show(r) + ", plain " + show(p));
}

Verdict decoder_only() {
  Rng rng(1);
  const auto params = build_model(ModelConfig::decoder_only(), rng).parameter_count();
  const bool count_ok = std::abs(double(params) - 298000.0) / 298000.0 <= 0.015;
  std::string detail = fmt("parameters %zu", params);
  const auto vst = find_run("nanogpt-vst", true);
  const auto vsv = find_run("nanogpt-vsv", true);
  if (!vst || !vsv) {
    if (!count_ok) return {Status::Fail, detail};
    return {Status::Skip, detail + " (within 1.5%); extended tier, " + missing({"nanogpt-vst", "nanogpt-vsv"})};
  }
  const double t = vst->curve.back().val_seq_acc, v = vsv->curve.back().val_seq_acc;
  return pass_if(count_ok && t >= 0.99 && v >= 0.72 && v <= 0.92,
                 detail + fmt("; VS_t %.4f VS_v %.4f", t, v));
}

Verdict determinism(const Smoke& first, const fs::path& scratch) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto second = smoke_run(scratch / "smoke-b");
  const double secs = first.seconds + seconds_since(t0);
  return pass_if(first.metrics == second.metrics && !first.metrics.empty() && secs < 600.0,
                 fmt("two smoke-add runs, seed 1: metrics.csv %s, %.0f s",
                     first.metrics == second.metrics ? "bit-identical" : "differs", secs));
}

}  // namespace

int main() {
  const fs::path scratch = fs::temp_directory_path() / "arithlm_acceptance";
  fs::create_directories(scratch);
  int failures = 0;
  auto report = [&](int id, const char* name, const std::function<Verdict()>& check) {
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {Status::Fail, std::string("error: ") + e.what()};
    }
    const char* tag = v.status == Status::Pass ? "PASS" : v.status == Status::Fail ? "FAIL" : "SKIP";
    if (v.status == Status::Fail) ++failures;
    std::printf("%s %2d %s: %s\n", tag, id, name, v.detail.c_str());
    std::fflush(stdout);
  };

  Smoke smoke;
  report(1, "oracle equivalence", oracles);
  report(2, "gradient correctness", gradients);
  report(3, "addition learnability", [&] {
    smoke = smoke_run(scratch / "smoke-a");
    return addition(smoke);
  });
  report(4, "multiplication learnability", multiplication);
  report(5, "random-output control", random_output);
  report(6, "extrapolation gap", extrapolation);
  report(7, "correlation structure", correlation);
  report(8, "amnesic probing", amnesic);
  report(9, "discontinuity matrix", discontinuity);
  report(10, "ablation outcomes", ablations);
  report(11, "order study", order_study);
  report(12, "decoder-only replication", decoder_only);
  report(13, "determinism", [&] { return determinism(smoke, scratch); });
  fs::remove_all(scratch);
  return failures == 0 ? 0 : 1;
}
