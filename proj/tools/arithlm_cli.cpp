#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "arithlm/amnesic.hpp"
#include "arithlm/analysis.hpp"
#include "arithlm/checkpoint.hpp"
#include "arithlm/errors.hpp"
#include "arithlm/experiments.hpp"
#include "arithlm/metrics.hpp"
#include "arithlm/presets.hpp"

namespace fs = std::filesystem;
using namespace arithlm;

namespace {

struct Common {
  std::string config;
  std::uint64_t seed = 1;
  std::string out = ".";
  bool seed_set = false;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "key-value configuration file (section.key = value)")
      ->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "run seed");
  app->add_option("--out", c.out, "output directory");
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os << text;
}

/// Preset from --preset or a run manifest, with --config overrides applied.
ExperimentPreset resolve_preset(const std::string& name, const std::string& run_dir,
                                const std::string& config) {
  ExperimentPreset p;
  if (!run_dir.empty()) {
    const auto manifest = completed_run(run_dir);
    if (!manifest) throw IoError("no manifest.json in " + run_dir);
    p = preset_from_json(manifest->at("preset"));
  } else {
    p = find_preset(name.empty() ? "add-random" : name);
  }
  if (!config.empty()) {
    std::string split = to_string(p.split);
    apply_key_values(read_key_value_file(config), p.task, p.model, p.train, &split);
    p.split = split_kind_from_string(split);
  }
  return p;
}

Model resolve_model(const std::string& checkpoint, const std::string& run_dir) {
  if (!checkpoint.empty()) return load_checkpoint(checkpoint).model;
  if (run_dir.empty()) throw ConfigError("pass --checkpoint or --run");
  const RunPaths paths{run_dir};
  const auto path = fs::exists(paths.best_checkpoint()) ? paths.best_checkpoint()
                                                        : paths.final_checkpoint();
  return load_checkpoint(path.string()).model;
}

void log_line(const std::string& s) { std::cerr << s << std::endl; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Arithmetic with small Transformers: data, training, analyses and presets"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  Common common;
  std::string preset_name, run_dir, checkpoint, manifest_path, suite_name;
  bool quiet = false, with_mul = false;
  std::size_t bits = 7;

  auto* gen = app.add_subcommand("gen-data", "export the dataset and split of a preset");
  add_common(gen, common);
  gen->add_option("--preset", preset_name, "preset name");

  auto* train_cmd = app.add_subcommand("train", "train from a preset and/or a config file");
  add_common(train_cmd, common);
  train_cmd->add_option("--preset", preset_name, "base preset (default add-random)");
  train_cmd->add_flag("--quiet", quiet, "no per-epoch progress");

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  add_common(eval_cmd, common);
  eval_cmd->add_option("--preset", preset_name, "preset giving task and split");
  eval_cmd->add_option("--run", run_dir, "run directory (manifest and checkpoints)");
  eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint file");

  auto* corr = app.add_subcommand("analyze-correlation", "distance correlation report");
  add_common(corr, common);
  corr->add_option("--preset", preset_name, "preset giving the task");
  corr->add_option("--run", run_dir, "run directory");
  corr->add_option("--checkpoint", checkpoint, "checkpoint file");

  auto* amn = app.add_subcommand("amnesic", "value probe and nullspace projection");
  add_common(amn, common);
  amn->add_option("--preset", preset_name, "preset giving task and split");
  amn->add_option("--run", run_dir, "run directory");
  amn->add_option("--checkpoint", checkpoint, "checkpoint file");

  auto* disc = app.add_subcommand("discontinuity", "bit-flip discontinuity matrix as CSV");
  add_common(disc, common);
  disc->add_option("--bits", bits, "operand bits")->check(CLI::Range(1, 16));

  auto* run = app.add_subcommand("run-preset", "train a named preset into a run directory");
  add_common(run, common);
  run->add_option("preset", preset_name, "preset name")->required();
  run->add_flag("--quiet", quiet, "no per-epoch progress");

  auto* rerun = app.add_subcommand("rerun", "re-run the experiment recorded in a manifest");
  add_common(rerun, common);
  rerun->add_option("manifest", manifest_path, "manifest.json")->required()->check(CLI::ExistingFile);
  rerun->add_flag("--quiet", quiet, "no per-epoch progress");

  auto* suite = app.add_subcommand("suite", "ablation, order or nanogpt suite with a summary table");
  add_common(suite, common);
  suite->add_option("name", suite_name, "ablation | order | nanogpt")
      ->required()
      ->check(CLI::IsMember({"ablation", "order", "nanogpt"}));
  suite->add_flag("--with-mul", with_mul, "include multiplication in the ablation suite");
  suite->add_flag("--quiet", quiet, "no per-epoch progress");

  auto* list = app.add_subcommand("list-presets", "print the available presets");
  add_common(list, common);
  bool as_json = false;
  list->add_flag("--json", as_json, "full preset definitions as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    const fs::path out = common.out;
    RunOptions run_opts;
    if (!quiet) run_opts.log = log_line;

    if (*list) {
      if (as_json) {
        Json j = Json::array();
        for (const auto& p : all_presets()) j.push_back(to_json(p));
        std::cout << j.dump(2) << '\n';
      } else {
        for (const auto& p : all_presets()) std::cout << p.name << "\t" << p.description << '\n';
      }
    } else if (*gen) {
      const auto preset = resolve_preset(preset_name, "", common.config);
      const auto data = build_dataset(preset, common.seed);
      write_file(out / "dataset.txt", export_dataset(data.samples, preset.task));
      Json split{{"name", data.split.name},
                 {"seed", data.split.seed},
                 {"train_ids", data.split.train_ids},
                 {"validation_ids", data.split.validation_ids}};
      if (data.split.centroid) {
        split["centroid"] = {data.split.centroid->first, data.split.centroid->second};
      }
      write_file(out / "split.json", split.dump() + "\n");
      std::cout << "wrote " << data.samples.size() << " samples to " << (out / "dataset.txt")
                << '\n';
    } else if (*train_cmd || *run) {
      const auto preset = resolve_preset(preset_name, "", common.config);
      const fs::path dir = *run ? out / preset.name : out;
      const auto outcome = run_preset(preset, common.seed, dir, run_opts);
      std::cout << outcome.manifest.at("final").dump() << '\n' << "run directory: " << dir << '\n';
    } else if (*rerun) {
      const auto outcome = rerun_manifest(manifest_path, out, run_opts);
      std::cout << outcome.manifest.at("final").dump() << '\n';
    } else if (*eval_cmd) {
      const auto preset = resolve_preset(preset_name, run_dir, common.config);
      const auto model = resolve_model(checkpoint, run_dir);
      const auto data = build_dataset(preset, common.seed);
      const auto ev = evaluate(model, data.samples, data.split.validation_ids, preset.task);
      const auto tr = evaluate(model, data.samples, data.split.train_ids, preset.task);
      Json j{{"preset", preset.name},
             {"validation",
              {{"sequence_accuracy", ev.sequence_accuracy},
               {"token_accuracy", ev.token_accuracy},
               {"mae", ev.mae},
               {"malformed_rate", ev.malformed_rate}}},
             {"train",
              {{"sequence_accuracy", tr.sequence_accuracy},
               {"token_accuracy", tr.token_accuracy},
               {"mae", tr.mae}}}};
      write_file(out / "eval.json", j.dump(2) + "\n");
      std::cout << j.dump(2) << '\n';
    } else if (*corr) {
      const auto preset = resolve_preset(preset_name, run_dir, common.config);
      const auto model = resolve_model(checkpoint, run_dir);
      const auto report = correlation_report(model, preset.task);
      write_file(out / "correlation.json", to_json(report).dump(2) + "\n");
      write_file(out / "correlation.csv", to_csv(report));
      write_file(out / "correlation_layers.svg", layer_series_svg(report));
      std::cout << "dec_vs_out_t " << Json(report.dec_vs_out_t).dump() << '\n'
                << "dec_vs_out_v " << Json(report.dec_vs_out_v).dump() << '\n';
    } else if (*amn) {
      const auto preset = resolve_preset(preset_name, run_dir, common.config);
      const auto model = resolve_model(checkpoint, run_dir);
      const auto data = build_dataset(preset, common.seed);
      AmnesicOptions opts;
      opts.control_seed = common.seed;
      const auto report = run_amnesic(model, preset.task, data.split.validation_ids, opts);
      write_file(out / "amnesic.json", to_json(report).dump(2) + "\n");
      export_directions((out / "amnesic_directions.bin").string(), report);
      std::cout << to_json(report).dump(2) << '\n';
    } else if (*disc) {
      const auto m = discontinuity_matrix(bits, 20000, 100000, common.seed);
      std::ostringstream os;
      os << "flipped";
      for (std::size_t j = 0; j <= m.output_bits; ++j) os << ",p" << j;
      os << ",method\n";
      char buf[32];
      for (std::size_t k = 0; k < m.cells.size(); ++k) {
        os << k;
        for (double v : m.cells[k]) {
          std::snprintf(buf, sizeof buf, ",%.6f", v);
          os << buf;
        }
        os << ',' << m.methods[k] << '\n';
      }
      write_file(out / "discontinuity.csv", os.str());
      std::cout << os.str();
    } else if (*suite) {
      const auto names = suite_name == "ablation" ? ablation_presets(with_mul)
                         : suite_name == "order"  ? order_presets()
                                                  : nanogpt_presets();
      const auto rows = run_suite(names, common.seed, out, run_opts);
      write_file(out / (suite_name + "_suite.json"), to_json(rows).dump(2) + "\n");
      write_file(out / (suite_name + "_suite.md"), suite_table(rows));
      std::cout << suite_table(rows);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
