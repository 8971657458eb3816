#include "arithlm/optim.hpp"

#include <cmath>

#include "arithlm/errors.hpp"

namespace arithlm {

namespace {

void update(std::span<Tensor> params, AdamState& state, const AdamConfig& cfg, bool decoupled) {
  if (state.m.empty()) {
    for (const Tensor& p : params) {
      state.m.emplace_back(p.size(), 0.0f);
      state.v.emplace_back(p.size(), 0.0f);
    }
  }
  if (state.m.size() != params.size()) {
    throw ContractError("optimizer state tracks " + std::to_string(state.m.size()) +
                        " tensors, got " + std::to_string(params.size()));
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(static_cast<double>(cfg.beta1), static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(static_cast<double>(cfg.beta2), static_cast<double>(state.step));
  const auto step_size = static_cast<real>(cfg.lr / bc1);
  const auto inv_sqrt_bc2 = static_cast<real>(1.0 / std::sqrt(bc2));
  const real decay = decoupled ? 1.0f - cfg.lr * cfg.weight_decay : 1.0f;

  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (m.size() != p.size() || !p.has_grad()) {
      throw ContractError("optimizer state shape does not match parameter");
    }
    real* w = p.ptr();
    const real* g = p.grad_ptr();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = cfg.beta1 * m[j] + (1.0f - cfg.beta1) * g[j];
      v[j] = cfg.beta2 * v[j] + (1.0f - cfg.beta2) * g[j] * g[j];
      const real denom = std::sqrt(v[j]) * inv_sqrt_bc2 + cfg.eps;
      w[j] = w[j] * decay - step_size * m[j] / denom;
    }
  }
}

}  // namespace

void adam_step(std::span<Tensor> params, AdamState& state, const AdamConfig& cfg) {
  update(params, state, cfg, false);
}

void adamw_step(std::span<Tensor> params, AdamState& state, const AdamConfig& cfg) {
  update(params, state, cfg, true);
}

double clip_grad_norm(std::span<Tensor> params, double max_norm) {
  double sq = 0.0;
  for (const Tensor& p : params) {
    for (real g : p.grad()) sq += static_cast<double>(g) * g;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const auto factor = static_cast<real>(max_norm / (norm + 1e-6));
    for (Tensor& p : params) {
      for (real& g : p.grad()) g *= factor;
    }
  }
  return norm;
}

}  // namespace arithlm
