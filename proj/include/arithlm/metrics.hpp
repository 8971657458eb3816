#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "arithlm/model.hpp"
#include "arithlm/tasks.hpp"

namespace arithlm {

// Token-level helpers operate on flat buffers of `length`-token completions so
// they can be checked without a model.

/// Fraction of rows where predicted == expected on every position.
double sequence_accuracy(std::span<const int> predicted, std::span<const int> expected,
                         std::size_t length);
/// Fraction of positions where predicted == expected.
double token_accuracy(std::span<const int> predicted, std::span<const int> expected);

struct MaeResult {
  double mae = 0.0;
  /// Fraction of generated tokens that were not bits.
  double malformed_rate = 0.0;
};

/// Mean |decode(predicted) - truth|; non-bit tokens decode as 0-bits.
MaeResult mean_absolute_error(std::span<const int> predicted, std::span<const std::uint64_t> truth,
                              std::size_t length, DigitOrder order);

struct Evaluation {
  double token_accuracy = 0.0;
  double sequence_accuracy = 0.0;
  double mae = 0.0;
  double malformed_rate = 0.0;
  std::vector<int> generated;  // flat, ids.size() * output_length
};

struct EvalOptions {
  std::size_t batch_size = 512;
  bool teacher_forced = true;
  bool generate = true;
};

/// Greedy-generation and teacher-forced metrics over samples[ids].
Evaluation evaluate(const Model& model, const std::vector<Sample>& samples,
                    std::span<const std::size_t> ids, const TaskSpec& task,
                    const EvalOptions& opts = {});

double sequence_accuracy(const Model& model, const std::vector<Sample>& samples,
                         std::span<const std::size_t> ids, const TaskSpec& task);
double token_accuracy(const Model& model, const std::vector<Sample>& samples,
                      std::span<const std::size_t> ids, const TaskSpec& task);
MaeResult mae(const Model& model, const std::vector<Sample>& samples,
              std::span<const std::size_t> ids, const TaskSpec& task);

TokenBatch make_batch(const std::vector<Sample>& samples, std::span<const std::size_t> ids);

struct FlopEstimate {
  std::uint64_t parameters = 0;
  std::uint64_t tokens = 0;
  std::uint64_t flops = 0;  // 6 * N * T
};

FlopEstimate estimate_flops(std::uint64_t parameters, std::uint64_t examples,
                            std::uint64_t seq_len, std::uint64_t epochs);

}  // namespace arithlm
