#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "arithlm/config.hpp"
#include "arithlm/presets.hpp"
#include "arithlm/train.hpp"

namespace arithlm {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kInitScheme =
    "linear U(+-1/sqrt(fan_in)); embeddings N(0, 1/d_model); norm gain 1, shift 0";

struct Dataset {
  std::vector<Sample> samples;
  SplitSpec split;
  std::uint64_t hash = 0;
};

/// Samples and split for a preset; everything random derives from `seed`.
Dataset build_dataset(const ExperimentPreset& preset, std::uint64_t seed);

struct RunPaths {
  std::filesystem::path dir;
  std::filesystem::path manifest() const { return dir / "manifest.json"; }
  std::filesystem::path metrics() const { return dir / "metrics.csv"; }
  std::filesystem::path checkpoints() const { return dir / "checkpoints"; }
  std::filesystem::path reports() const { return dir / "reports"; }
  std::filesystem::path best_checkpoint() const { return checkpoints() / "best.ckpt"; }
  std::filesystem::path final_checkpoint() const { return checkpoints() / "final.ckpt"; }
};

struct RunOptions {
  /// Per-epoch progress lines; null for silence.
  std::function<void(const std::string&)> log;
  /// Skip the preset's post-training analyses.
  bool skip_analyses = false;
};

struct RunOutcome {
  RunPaths paths;
  TrainResult result;
  Json manifest;
};

/// Trains the preset into `dir`, writing manifest.json, metrics.csv,
/// checkpoints/ and reports/.
RunOutcome run_preset(const ExperimentPreset& preset, std::uint64_t seed,
                      const std::filesystem::path& dir, const RunOptions& opts = {});

/// Re-runs the preset and seed recorded in a manifest.
RunOutcome rerun_manifest(const std::filesystem::path& manifest, const std::filesystem::path& dir,
                          const RunOptions& opts = {});

/// Manifest of a finished run in `dir`, if any.
std::optional<Json> completed_run(const std::filesystem::path& dir);
std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path);

/// Post-training reports for a model: "correlation" and "amnesic".
void run_analyses(const Model& model, const ExperimentPreset& preset, const Dataset& data,
                  const std::filesystem::path& reports_dir);

struct SuiteRow {
  std::string preset;
  std::optional<std::size_t> epochs_to_95;
  double final_val_seq_acc = 0.0;
  double final_train_seq_acc = 0.0;
  double final_mae = 0.0;
  std::size_t parameters = 0;
};

/// Runs (or reuses finished runs of) each preset under root/<name>.
std::vector<SuiteRow> run_suite(const std::vector<std::string>& presets, std::uint64_t seed,
                                const std::filesystem::path& root, const RunOptions& opts = {});

std::vector<std::string> ablation_presets(bool include_multiplication = false);
std::vector<std::string> order_presets();
std::vector<std::string> nanogpt_presets();

/// Markdown table: preset, epochs to 95% or "--- (final%)", final accuracies.
std::string suite_table(const std::vector<SuiteRow>& rows);
Json to_json(const std::vector<SuiteRow>& rows);

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 1469598103934665603ull);

}  // namespace arithlm
