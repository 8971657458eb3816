#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "arithlm/tensor.hpp"

namespace arithlm {

struct AdamConfig {
  real lr = 1e-4f;
  real beta1 = 0.9f;
  real beta2 = 0.98f;
  real eps = 1e-8f;
  /// Decoupled decay; only read by adamw_step.
  real weight_decay = 0.0f;
};

struct AdamState {
  std::vector<std::vector<real>> m;
  std::vector<std::vector<real>> v;
  std::uint64_t step = 0;
};

/// Bias-corrected Adam over each tensor's grad buffer.
void adam_step(std::span<Tensor> params, AdamState& state, const AdamConfig& cfg);
/// Adam with decoupled weight decay: p <- p - lr * wd * p before the moment update.
void adamw_step(std::span<Tensor> params, AdamState& state, const AdamConfig& cfg);

/// Rescales all gradients so their joint L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_grad_norm(std::span<Tensor> params, double max_norm);

}  // namespace arithlm
