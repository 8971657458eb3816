#include "arithlm/train.hpp"

#include <cmath>
#include <cstdio>

#include "arithlm/errors.hpp"
#include "arithlm/ops.hpp"

namespace arithlm {

std::string to_string(OptimizerKind k) { return k == OptimizerKind::Adam ? "adam" : "adamw"; }

OptimizerKind optimizer_from_string(const std::string& s) {
  if (s == "adam") return OptimizerKind::Adam;
  if (s == "adamw") return OptimizerKind::AdamW;
  throw ConfigError("unknown optimizer '" + s + "'");
}

TrainConfig TrainConfig::encoder_decoder() { return TrainConfig{}; }

TrainConfig TrainConfig::decoder_only() {
  TrainConfig c;
  c.optimizer = OptimizerKind::AdamW;
  c.lr = 1e-3f;
  c.weight_decay = 0.01f;
  c.grad_clip = 1.0;
  return c;
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (epochs == 0) throw ConfigError("epochs must be >= 1");
  if (!(beta1 > 0.0f && beta1 < 1.0f) || !(beta2 > 0.0f && beta2 < 1.0f)) {
    throw ConfigError("betas must lie in (0, 1)");
  }
  if (!(lr > 0.0f)) throw ConfigError("learning rate must be positive");
  if (eval_batch == 0) throw ConfigError("eval_batch must be >= 1");
}

std::string metrics_csv_header() {
  return "epoch,loss,train_token_acc,val_token_acc,train_seq_acc,val_seq_acc,mae";
}

std::string to_csv(const MetricsRow& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g", r.epoch, r.loss,
                r.train_token_acc, r.val_token_acc, r.train_seq_acc, r.val_seq_acc, r.mae);
  return buf;
}

TrainResult train(Model& model, const std::vector<Sample>& samples, const SplitSpec& split,
                  const TaskSpec& task, const TrainConfig& config,
                  const TrainCallbacks& callbacks) {
  config.validate();
  if (split.train_ids.empty() || split.validation_ids.empty()) {
    throw ContractError("train: split needs non-empty train and validation sets");
  }
  for (auto id : split.train_ids) {
    if (id >= samples.size()) throw ContractError("train: split references unknown sample");
  }
  for (auto id : split.validation_ids) {
    if (id >= samples.size()) throw ContractError("train: split references unknown sample");
  }

  const Rng root(config.seed);
  Rng shuffle_rng = root.split(1);
  Rng dropout_rng = root.split(2);
  Rng subsample_rng = root.split(3);

  std::vector<std::size_t> train_eval_ids = split.train_ids;
  if (config.train_eval_subsample > 0 && config.train_eval_subsample < train_eval_ids.size()) {
    auto perm = subsample_rng.permutation(train_eval_ids.size());
    std::vector<std::size_t> picked;
    for (std::size_t i = 0; i < config.train_eval_subsample; ++i) {
      picked.push_back(train_eval_ids[perm[i]]);
    }
    train_eval_ids = std::move(picked);
  }

  std::vector<Tensor> params;
  for (auto& [name, t] : model.parameters()) params.push_back(t);
  AdamState state;
  AdamConfig adam{config.lr, config.beta1, config.beta2, config.eps, config.weight_decay};
  EvalOptions eval_opts{config.eval_batch, true, true};

  TrainResult result;
  double best = -1.0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    auto order = shuffle_rng.permutation(split.train_ids.size());
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<std::size_t> ids;
      ids.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) ids.push_back(split.train_ids[order[i]]);
      TokenBatch batch = make_batch(samples, ids);

      Tape tape;
      PassOptions opts{true, &dropout_rng, false};
      auto fr = model.forward(tape, batch, opts);
      Tensor loss = ops::cross_entropy(tape, fr.logits, batch.targets);
      const real value = loss.item();
      if (!std::isfinite(value)) {
        if (callbacks.on_checkpoint) callbacks.on_checkpoint(model, epoch, CheckpointKind::Diagnostic);
        throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(batches + 1));
      }
      model.zero_grad();
      tape.backward(loss);
      if (config.grad_clip > 0.0) clip_grad_norm(params, config.grad_clip);
      if (config.optimizer == OptimizerKind::Adam) {
        adam_step(params, state, adam);
      } else {
        adamw_step(params, state, adam);
      }
      loss_sum += value;
      ++batches;
    }

    MetricsRow row;
    row.epoch = epoch;
    row.loss = loss_sum / static_cast<double>(batches);
    const auto tr = evaluate(model, samples, train_eval_ids, task, eval_opts);
    const auto va = evaluate(model, samples, split.validation_ids, task, eval_opts);
    row.train_token_acc = tr.token_accuracy;
    row.train_seq_acc = tr.sequence_accuracy;
    row.val_token_acc = va.token_accuracy;
    row.val_seq_acc = va.sequence_accuracy;
    row.mae = va.mae;
    result.curve.push_back(row);
    if (callbacks.on_epoch) callbacks.on_epoch(row);

    if (row.val_seq_acc > best) {
      best = row.val_seq_acc;
      result.best_epoch = epoch;
      result.best_val_seq_acc = best;
      if (callbacks.on_checkpoint) callbacks.on_checkpoint(model, epoch, CheckpointKind::Best);
    }
    if (config.stop_at_val_seq_acc > 0.0 && row.val_seq_acc >= config.stop_at_val_seq_acc) {
      break;
    }
  }
  if (callbacks.on_checkpoint) {
    callbacks.on_checkpoint(model, result.curve.back().epoch, CheckpointKind::Final);
  }
  return result;
}

ThresholdCrossing epochs_to_threshold(const std::vector<MetricsRow>& curve, double threshold) {
  ThresholdCrossing out;
  for (const auto& row : curve) {
    if (row.val_seq_acc >= threshold) {
      out.epoch = row.epoch;
      out.final_accuracy = row.val_seq_acc;
      return out;
    }
  }
  if (!curve.empty()) out.final_accuracy = curve.back().val_seq_acc;
  return out;
}

}  // namespace arithlm
