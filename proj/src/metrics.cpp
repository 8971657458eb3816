#include "arithlm/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "arithlm/errors.hpp"

namespace arithlm {

double sequence_accuracy(std::span<const int> predicted, std::span<const int> expected,
                         std::size_t length) {
  if (predicted.size() != expected.size() || length == 0 || expected.size() % length != 0) {
    throw ContractError("sequence_accuracy: mismatched token buffers");
  }
  const std::size_t rows = expected.size() / length;
  if (rows == 0) throw ContractError("sequence_accuracy: empty sample list");
  std::size_t correct = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    correct += std::equal(predicted.begin() + static_cast<std::ptrdiff_t>(r * length),
                          predicted.begin() + static_cast<std::ptrdiff_t>((r + 1) * length),
                          expected.begin() + static_cast<std::ptrdiff_t>(r * length));
  }
  return static_cast<double>(correct) / static_cast<double>(rows);
}

double token_accuracy(std::span<const int> predicted, std::span<const int> expected) {
  if (predicted.size() != expected.size()) {
    throw ContractError("token_accuracy: mismatched token buffers");
  }
  if (expected.empty()) throw ContractError("token_accuracy: empty sample list");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < expected.size(); ++i) correct += predicted[i] == expected[i];
  return static_cast<double>(correct) / static_cast<double>(expected.size());
}

MaeResult mean_absolute_error(std::span<const int> predicted, std::span<const std::uint64_t> truth,
                              std::size_t length, DigitOrder order) {
  if (truth.empty() || predicted.size() != truth.size() * length) {
    throw ContractError("mean_absolute_error: mismatched buffers");
  }
  double total = 0.0;
  std::size_t malformed = 0;
  for (std::size_t r = 0; r < truth.size(); ++r) {
    const auto v = decode_lenient(predicted.subspan(r * length, length), order, &malformed);
    total += std::abs(static_cast<double>(v) - static_cast<double>(truth[r]));
  }
  return {total / static_cast<double>(truth.size()),
          static_cast<double>(malformed) / static_cast<double>(predicted.size())};
}

TokenBatch make_batch(const std::vector<Sample>& samples, std::span<const std::size_t> ids) {
  TokenBatch batch;
  batch.size = ids.size();
  if (ids.empty()) return batch;
  batch.prompt_len = samples[ids[0]].prompt.size();
  batch.target_len = samples[ids[0]].completion.size();
  batch.prompts.reserve(batch.size * batch.prompt_len);
  batch.targets.reserve(batch.size * batch.target_len);
  for (auto id : ids) {
    const auto& s = samples[id];
    batch.prompts.insert(batch.prompts.end(), s.prompt.begin(), s.prompt.end());
    batch.targets.insert(batch.targets.end(), s.completion.begin(), s.completion.end());
  }
  return batch;
}

Evaluation evaluate(const Model& model, const std::vector<Sample>& samples,
                    std::span<const std::size_t> ids, const TaskSpec& task,
                    const EvalOptions& opts) {
  if (ids.empty()) throw ContractError("evaluate: empty sample list");
  const std::size_t m = samples[ids[0]].completion.size();
  const std::size_t V = model.config().vocab_size;
  std::vector<int> expected;
  std::vector<std::uint64_t> truth;
  std::vector<int> forced;
  Evaluation ev;
  for (std::size_t start = 0; start < ids.size(); start += opts.batch_size) {
    const auto chunk = ids.subspan(start, std::min(opts.batch_size, ids.size() - start));
    TokenBatch batch = make_batch(samples, chunk);
    expected.insert(expected.end(), batch.targets.begin(), batch.targets.end());
    for (auto id : chunk) truth.push_back(samples[id].result);
    if (opts.teacher_forced) {
      Tape tape(false);
      auto fr = model.forward(tape, batch, PassOptions{});
      for (std::size_t r = 0; r < fr.logits.rows(); ++r) {
        const real* row = fr.logits.ptr() + r * V;
        forced.push_back(static_cast<int>(std::max_element(row, row + V) - row));
      }
    }
    if (opts.generate) {
      auto gen = model.generate(batch.prompts, batch.prompt_len, m);
      ev.generated.insert(ev.generated.end(), gen.begin(), gen.end());
    }
  }
  if (opts.teacher_forced) ev.token_accuracy = token_accuracy(forced, expected);
  if (opts.generate) {
    ev.sequence_accuracy = sequence_accuracy(ev.generated, expected, m);
    const auto e = mean_absolute_error(ev.generated, truth, m, task.output_order);
    ev.mae = e.mae;
    ev.malformed_rate = e.malformed_rate;
  }
  return ev;
}

double sequence_accuracy(const Model& model, const std::vector<Sample>& samples,
                         std::span<const std::size_t> ids, const TaskSpec& task) {
  return evaluate(model, samples, ids, task, {512, false, true}).sequence_accuracy;
}

double token_accuracy(const Model& model, const std::vector<Sample>& samples,
                      std::span<const std::size_t> ids, const TaskSpec& task) {
  return evaluate(model, samples, ids, task, {512, true, false}).token_accuracy;
}

MaeResult mae(const Model& model, const std::vector<Sample>& samples,
              std::span<const std::size_t> ids, const TaskSpec& task) {
  const auto ev = evaluate(model, samples, ids, task, {512, false, true});
  return {ev.mae, ev.malformed_rate};
}

FlopEstimate estimate_flops(std::uint64_t parameters, std::uint64_t examples,
                            std::uint64_t seq_len, std::uint64_t epochs) {
  FlopEstimate f;
  f.parameters = parameters;
  f.tokens = examples * seq_len * epochs;
  f.flops = 6 * parameters * f.tokens;
  return f;
}

}  // namespace arithlm
