#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include "arithlm/rng.hpp"
#include "arithlm/tape.hpp"
#include "arithlm/tensor.hpp"

namespace arithlm::ops {

// All ops treat tensors as 2-D [rows x cols] where that matters and record a
// backward rule on `tape` whenever an input requires grad.

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);

/// x [n x in] . w [in x out] + bias [out]; bias may be null.
Tensor linear(Tape& tape, const Tensor& x, const Tensor& w, const Tensor* bias);

Tensor add(Tape& tape, const Tensor& a, const Tensor& b);

/// Row r of x gets row (r % period) of table added. Used for positional tables.
Tensor add_rows(Tape& tape, const Tensor& x, const Tensor& table, std::size_t period);

Tensor scale(Tape& tape, const Tensor& x, real factor);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sum(Tape& tape, const Tensor& x);
Tensor relu(Tape& tape, const Tensor& x);
/// tanh approximation.
Tensor gelu(Tape& tape, const Tensor& x);

/// beta may be null (gain-only normalization).
Tensor layer_norm(Tape& tape, const Tensor& x, const Tensor& gamma, const Tensor* beta,
                  real eps = 1e-5f);

/// Gathers rows of table [vocab x d] for each id.
Tensor embedding(Tape& tape, const Tensor& table, std::span<const int> ids);

/// Inverted dropout. Identity when rng is null or p == 0.
Tensor dropout(Tape& tape, const Tensor& x, real p, Rng* rng);

/// Row-wise softmax with max subtraction. Non-finite input is a NumericError.
Tensor softmax_rows(Tape& tape, const Tensor& x);

struct AttentionSpec {
  std::size_t batch = 1;
  std::size_t q_len = 1;
  std::size_t kv_len = 1;
  std::size_t heads = 1;
  bool causal = false;
  real dropout = 0.0f;
  Rng* rng = nullptr;
};

/// Multi-head scaled dot-product attention over already projected q/k/v.
/// q is [batch*q_len x d], k and v are [batch*kv_len x d]; head h owns
/// columns [h*d/heads, (h+1)*d/heads).
Tensor attention(Tape& tape, const Tensor& q, const Tensor& k, const Tensor& v,
                 const AttentionSpec& spec);

/// Mean negative log-likelihood of targets under row-wise softmax of logits.
/// Rows whose target is negative are ignored.
Tensor cross_entropy(Tape& tape, const Tensor& logits, std::span<const int> targets);

/// Non-differentiable rewrite of consecutive row blocks. `fn` receives the
/// flattened block of `block_rows` rows and edits it in place.
using BlockTransform = std::function<void(std::span<real> block, std::size_t rows)>;
Tensor transform_blocks(const Tensor& x, std::size_t block_rows, const BlockTransform& fn);

}  // namespace arithlm::ops
