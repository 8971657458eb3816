#include "arithlm/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "arithlm/amnesic.hpp"
#include "arithlm/analysis.hpp"
#include "arithlm/checkpoint.hpp"
#include "arithlm/errors.hpp"
#include "arithlm/metrics.hpp"

namespace fs = std::filesystem;

namespace arithlm {

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

namespace {

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os << text;
  if (!os) throw IoError("write failed for " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::uint64_t dataset_hash(const std::vector<Sample>& samples, const SplitSpec& split,
                           const TaskSpec& task) {
  std::uint64_t h = fnv1a(export_dataset(samples, task));
  auto ids = [&](const std::vector<std::size_t>& v) {
    for (std::size_t id : v) h = fnv1a(std::to_string(id) + ",", h);
    h = fnv1a("|", h);
  };
  ids(split.train_ids);
  ids(split.validation_ids);
  return h;
}

}  // namespace

Dataset build_dataset(const ExperimentPreset& preset, std::uint64_t seed) {
  preset.task.validate();
  Dataset d;
  if (preset.random_output) {
    if (preset.task.op != Operation::Add) {
      throw ConfigError("random-output datasets use addition prompts");
    }
    d.samples = random_output_dataset(seed, preset.task.operand_bits);
  } else {
    d.samples = generate_all(preset.task);
  }
  switch (preset.split) {
    case SplitKind::Random: d.split = random_split(d.samples.size(), seed); break;
    case SplitKind::VsT: d.split = split_vs_t(d.samples, preset.task); break;
    case SplitKind::VsV: d.split = split_vs_v(d.samples, preset.task); break;
  }
  d.hash = dataset_hash(d.samples, d.split, preset.task);
  return d;
}

void run_analyses(const Model& model, const ExperimentPreset& preset, const Dataset& data,
                  const fs::path& reports_dir) {
  fs::create_directories(reports_dir);
  for (const auto& name : preset.analyses) {
    if (name == "correlation") {
      const auto report = correlation_report(model, preset.task);
      write_text(reports_dir / "correlation.json", to_json(report).dump(2) + "\n");
      write_text(reports_dir / "correlation.csv", to_csv(report));
      write_text(reports_dir / "correlation_layers.svg", layer_series_svg(report));
    } else if (name == "amnesic") {
      try {
        const auto report = run_amnesic(model, preset.task, data.split.validation_ids);
        write_text(reports_dir / "amnesic.json", to_json(report).dump(2) + "\n");
        export_directions((reports_dir / "amnesic_directions.bin").string(), report);
      } catch (const PreconditionError& e) {
        write_text(reports_dir / "amnesic.json",
                   Json{{"skipped", true}, {"reason", e.what()}}.dump(2) + "\n");
      }
    } else {
      throw ConfigError("unknown analysis '" + name + "'");
    }
  }
}

RunOutcome run_preset(const ExperimentPreset& preset_in, std::uint64_t seed, const fs::path& dir,
                      const RunOptions& opts) {
  ExperimentPreset preset = preset_in;
  preset.train.seed = seed;
  preset.model.validate();
  preset.train.validate();
  if (preset.model.family == Family::DecoderOnly &&
      preset.model.max_positions < preset.task.prompt_length() + preset.task.output_length() - 1) {
    throw ConfigError("max_positions too small for the task's sequence length");
  }

  RunOutcome out;
  out.paths.dir = dir;
  fs::create_directories(dir);
  fs::remove(out.paths.manifest());
  fs::create_directories(out.paths.checkpoints());
  fs::create_directories(out.paths.reports());

  const auto start = std::chrono::steady_clock::now();
  const Dataset data = build_dataset(preset, seed);
  Rng init = Rng(seed).split(100);
  Model model = build_model(preset.model, init);

  std::ofstream metrics(out.paths.metrics(), std::ios::binary | std::ios::trunc);
  if (!metrics) throw IoError("cannot write " + out.paths.metrics().string());
  metrics << metrics_csv_header() << '\n';

  TrainCallbacks cb;
  cb.on_epoch = [&](const MetricsRow& row) {
    metrics << to_csv(row) << '\n';
    metrics.flush();
    if (opts.log) {
      char line[200];
      std::snprintf(line, sizeof line,
                    "[%s] epoch %zu loss %.5f val_seq %.4f train_seq %.4f mae %.4f",
                    preset.name.c_str(), row.epoch, row.loss, row.val_seq_acc, row.train_seq_acc,
                    row.mae);
      opts.log(line);
    }
  };
  cb.on_checkpoint = [&](const Model& m, std::size_t epoch, CheckpointKind kind) {
    const fs::path path = kind == CheckpointKind::Best    ? out.paths.best_checkpoint()
                          : kind == CheckpointKind::Final ? out.paths.final_checkpoint()
                                                          : out.paths.checkpoints() / "diverged.ckpt";
    save_checkpoint(path.string(), m, seed, epoch);
  };

  out.result = train(model, data.samples, data.split, preset.task, preset.train, cb);
  metrics.close();

  if (!opts.skip_analyses) run_analyses(model, preset, data, out.paths.reports());
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const std::size_t seq_len = preset.model.family == Family::EncoderDecoder
                                  ? preset.task.prompt_length() + preset.task.output_length()
                                  : preset.task.prompt_length() + preset.task.output_length() - 1;
  const auto flops = estimate_flops(model.parameter_count(), data.split.train_ids.size(), seq_len,
                                    out.result.curve.size());
  const auto crossing = epochs_to_threshold(out.result.curve, 0.95);
  const MetricsRow last = out.result.curve.empty() ? MetricsRow{} : out.result.curve.back();

  Json reports = Json::array();
  for (const auto& entry : fs::directory_iterator(out.paths.reports())) {
    reports.push_back(entry.path().filename().string());
  }
  std::sort(reports.begin(), reports.end());

  out.manifest = Json{
      {"preset", to_json(preset)},
      {"seed", seed},
      {"seeds",
       {{"dataset", seed}, {"init", "split(100) of the run seed"}, {"train", seed}}},
      {"dataset",
       {{"hash", hex(data.hash)},
        {"samples", data.samples.size()},
        {"train", data.split.train_ids.size()},
        {"validation", data.split.validation_ids.size()},
        {"split", data.split.name}}},
      {"tool_version", kToolVersion},
      {"rng", Rng::kAlgorithm},
      {"init_scheme", kInitScheme},
      {"parameters", model.parameter_count()},
      {"paths",
       {{"metrics", "metrics.csv"},
        {"best_checkpoint", "checkpoints/best.ckpt"},
        {"final_checkpoint", "checkpoints/final.ckpt"},
        {"reports", reports}}},
      {"epochs_run", out.result.curve.size()},
      {"best_epoch", out.result.best_epoch},
      {"best_val_seq_acc", out.result.best_val_seq_acc},
      {"epochs_to_95", crossing.epoch ? Json(*crossing.epoch) : Json(nullptr)},
      {"final",
       {{"loss", last.loss},
        {"train_seq_acc", last.train_seq_acc},
        {"val_seq_acc", last.val_seq_acc},
        {"val_token_acc", last.val_token_acc},
        {"mae", last.mae}}},
      {"wall_clock_seconds", seconds},
      {"estimated_flops",
       {{"parameters", flops.parameters}, {"tokens", flops.tokens}, {"flops", flops.flops}}}};
  if (data.split.centroid) {
    out.manifest["dataset"]["centroid"] = {data.split.centroid->first, data.split.centroid->second};
  }
  write_text(out.paths.manifest(), out.manifest.dump(2) + "\n");
  return out;
}

RunOutcome rerun_manifest(const fs::path& manifest, const fs::path& dir, const RunOptions& opts) {
  const Json j = Json::parse(read_text(manifest));
  return run_preset(preset_from_json(j.at("preset")), j.at("seed").get<std::uint64_t>(), dir,
                    opts);
}

std::optional<Json> completed_run(const fs::path& dir) {
  RunPaths p{dir};
  if (!fs::exists(p.manifest())) return std::nullopt;
  try {
    return Json::parse(read_text(p.manifest()));
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::vector<MetricsRow> read_metrics_csv(const fs::path& path) {
  std::istringstream is(read_text(path));
  std::string line;
  std::getline(is, line);
  if (line != metrics_csv_header()) throw IoError("unexpected metrics header in " + path.string());
  std::vector<MetricsRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    MetricsRow r;
    char comma;
    std::istringstream ls(line);
    ls >> r.epoch >> comma >> r.loss >> comma >> r.train_token_acc >> comma >> r.val_token_acc >>
        comma >> r.train_seq_acc >> comma >> r.val_seq_acc >> comma >> r.mae;
    if (!ls) throw IoError("malformed metrics row: " + line);
    rows.push_back(r);
  }
  return rows;
}

std::vector<SuiteRow> run_suite(const std::vector<std::string>& presets, std::uint64_t seed,
                                const fs::path& root, const RunOptions& opts) {
  std::vector<SuiteRow> rows;
  for (const auto& name : presets) {
    const auto& preset = find_preset(name);
    const fs::path dir = root / name;
    auto manifest = completed_run(dir);
    if (!manifest || manifest->at("seed").get<std::uint64_t>() != seed ||
        manifest->at("preset") != to_json([&] {
          auto p = preset;
          p.train.seed = seed;
          return p;
        }())) {
      manifest = run_preset(preset, seed, dir, opts).manifest;
    }
    const auto curve = read_metrics_csv(RunPaths{dir}.metrics());
    const auto crossing = epochs_to_threshold(curve, 0.95);
    SuiteRow row;
    row.preset = name;
    row.epochs_to_95 = crossing.epoch;
    row.final_val_seq_acc = crossing.final_accuracy;
    if (!curve.empty()) {
      row.final_train_seq_acc = curve.back().train_seq_acc;
      row.final_mae = curve.back().mae;
    }
    row.parameters = manifest->at("parameters").get<std::size_t>();
    rows.push_back(row);
  }
  return rows;
}

std::vector<std::string> ablation_presets(bool include_multiplication) {
  std::vector<std::string> v{"reverse-order-add", "ablation-squeeze", "ablation-h1",
                             "ablation-d32",      "ablation-nope",    "ablation-noattn",
                             "ablation-noffn"};
  if (include_multiplication) v.push_back("plain-order-mul");
  return v;
}

std::vector<std::string> order_presets() {
  return {"reverse-order-add", "plain-order-add", "input-plain-add", "plain-order-mul"};
}

std::vector<std::string> nanogpt_presets() {
  return {"nanogpt-add", "nanogpt-vst", "nanogpt-vsv", "nanogpt-mul"};
}

std::string suite_table(const std::vector<SuiteRow>& rows) {
  std::ostringstream os;
  os << "| preset | params | epochs to 95% | final val seq acc | final train seq acc | mae |\n";
  os << "|---|---|---|---|---|---|\n";
  char buf[64];
  for (const auto& r : rows) {
    os << "| " << r.preset << " | " << r.parameters << " | ";
    if (r.epochs_to_95) {
      os << *r.epochs_to_95;
    } else {
      std::snprintf(buf, sizeof buf, "--- (%.1f%%)", 100.0 * r.final_val_seq_acc);
      os << buf;
    }
    std::snprintf(buf, sizeof buf, " | %.4f | %.4f | %.4f |\n", r.final_val_seq_acc,
                  r.final_train_seq_acc, r.final_mae);
    os << buf;
  }
  return os.str();
}

Json to_json(const std::vector<SuiteRow>& rows) {
  Json j = Json::array();
  for (const auto& r : rows) {
    j.push_back({{"preset", r.preset},
                 {"parameters", r.parameters},
                 {"epochs_to_95", r.epochs_to_95 ? Json(*r.epochs_to_95) : Json(nullptr)},
                 {"final_val_seq_acc", r.final_val_seq_acc},
                 {"final_train_seq_acc", r.final_train_seq_acc},
                 {"mae", r.final_mae}});
  }
  return j;
}

}  // namespace arithlm
