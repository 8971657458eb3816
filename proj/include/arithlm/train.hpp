#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "arithlm/metrics.hpp"
#include "arithlm/model.hpp"
#include "arithlm/optim.hpp"
#include "arithlm/tasks.hpp"

namespace arithlm {

enum class OptimizerKind { Adam, AdamW };
std::string to_string(OptimizerKind k);
OptimizerKind optimizer_from_string(const std::string& s);

struct TrainConfig {
  OptimizerKind optimizer = OptimizerKind::Adam;
  float lr = 1e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.98f;
  float eps = 1e-8f;
  float weight_decay = 0.0f;
  std::size_t batch_size = 128;
  std::size_t epochs = 100;
  /// 0 disables clipping.
  double grad_clip = 0.0;
  std::uint64_t seed = 1;
  /// Train-set metrics use this many fixed samples; 0 means the full train set.
  std::size_t train_eval_subsample = 2048;
  std::size_t eval_batch = 512;
  /// Stop once validation sequence accuracy reaches this value (0 = never).
  double stop_at_val_seq_acc = 0.0;

  /// Encoder-decoder recipe: Adam, lr 1e-4, betas (0.9, 0.98), batch 128.
  static TrainConfig encoder_decoder();
  /// Decoder-only recipe: AdamW, lr 1e-3, betas (0.9, 0.98), clip 1.0.
  static TrainConfig decoder_only();
  void validate() const;
};

struct MetricsRow {
  std::size_t epoch = 0;
  double loss = 0.0;
  double train_token_acc = 0.0;
  double val_token_acc = 0.0;
  double train_seq_acc = 0.0;
  double val_seq_acc = 0.0;
  double mae = 0.0;
};

std::string metrics_csv_header();
std::string to_csv(const MetricsRow& row);

enum class CheckpointKind { Best, Final, Diagnostic };

struct TrainCallbacks {
  std::function<void(const MetricsRow&)> on_epoch;
  std::function<void(const Model&, std::size_t epoch, CheckpointKind)> on_checkpoint;
};

struct TrainResult {
  std::vector<MetricsRow> curve;
  std::size_t best_epoch = 0;
  double best_val_seq_acc = 0.0;
};

/// Shuffled minibatch descent with per-epoch evaluation on the validation ids
/// and a fixed train subsample. Deterministic given config.seed.
TrainResult train(Model& model, const std::vector<Sample>& samples, const SplitSpec& split,
                  const TaskSpec& task, const TrainConfig& config,
                  const TrainCallbacks& callbacks = {});

struct ThresholdCrossing {
  std::optional<std::size_t> epoch;
  double final_accuracy = 0.0;
};

/// First epoch whose validation sequence accuracy reaches `threshold`.
ThresholdCrossing epochs_to_threshold(const std::vector<MetricsRow>& curve,
                                      double threshold = 0.95);

}  // namespace arithlm
