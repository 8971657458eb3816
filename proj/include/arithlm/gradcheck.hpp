#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "arithlm/tape.hpp"
#include "arithlm/tensor.hpp"

namespace arithlm {

struct GradCheckOptions {
  double eps = 1e-6;
  double rtol = 1e-3;
  /// Coordinates whose gradients are both below this are compared absolutely.
  double atol = 1e-4;
  std::size_t samples_per_tensor = 16;
  std::uint64_t seed = 1;
};

struct GradCheckResult {
  std::size_t checked = 0;
  std::size_t failures = 0;
  double max_rel_error = 0.0;
  std::string worst;  // "<tensor>[index]"
};

/// Builds a scalar loss on the given tape from the current leaf values.
using LossFn = std::function<Tensor(Tape&)>;

/// Compares reverse-mode gradients of `loss` with central differences on
/// sampled coordinates of each named leaf.
GradCheckResult gradient_check(const LossFn& loss,
                               const std::vector<std::pair<std::string, Tensor>>& leaves,
                               const GradCheckOptions& opts = {});

}  // namespace arithlm
