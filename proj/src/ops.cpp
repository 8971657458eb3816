#include "arithlm/ops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "arithlm/errors.hpp"

namespace arithlm::ops {

namespace {

using MatR = Eigen::Matrix<real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;

MapR as_mat(real* p, std::size_t r, std::size_t c) {
  return MapR(p, static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}
CMapR as_mat(const real* p, std::size_t r, std::size_t c) {
  return CMapR(p, static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

void require_finite(const Tensor& x, const char* op) {
  for (real v : x.data()) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string(op) + ": non-finite input");
    }
  }
}

}  // namespace

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.shape()[1] != b.shape()[0]) {
    throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  Tensor out({m, n});
  as_mat(out.ptr(), m, n).noalias() = as_mat(a.ptr(), m, k) * as_mat(b.ptr(), k, n);
  if (tape.wants({&a, &b})) {
    tape.record(out, [a, b, out, m, k, n]() mutable {
      auto g = as_mat(out.grad_ptr(), m, n);
      if (a.requires_grad()) {
        as_mat(a.grad_ptr(), m, k).noalias() += g * as_mat(b.ptr(), k, n).transpose();
      }
      if (b.requires_grad()) {
        as_mat(b.grad_ptr(), k, n).noalias() += as_mat(a.ptr(), m, k).transpose() * g;
      }
    });
  }
  return out;
}

Tensor linear(Tape& tape, const Tensor& x, const Tensor& w, const Tensor* bias) {
  const std::size_t n = x.rows(), in = x.cols();
  if (w.ndim() != 2 || w.shape()[0] != in) {
    throw DimensionError("linear: input " + shape_str(x.shape()) + " vs weight " +
                         shape_str(w.shape()));
  }
  const std::size_t out_dim = w.shape()[1];
  if (bias && bias->size() != out_dim) {
    throw DimensionError("linear: bias " + shape_str(bias->shape()) + " vs weight " +
                         shape_str(w.shape()));
  }
  Tensor out({n, out_dim});
  auto y = as_mat(out.ptr(), n, out_dim);
  y.noalias() = as_mat(x.ptr(), n, in) * as_mat(w.ptr(), in, out_dim);
  if (bias) {
    y.rowwise() += Eigen::Map<const Eigen::Matrix<real, 1, Eigen::Dynamic>>(bias->ptr(),
                                                        static_cast<Eigen::Index>(out_dim));
  }
  if (tape.wants({&x, &w, bias})) {
    Tensor b = bias ? *bias : Tensor();
    const bool has_bias = bias != nullptr;
    tape.record(out, [x, w, b, has_bias, out, n, in, out_dim]() mutable {
      auto g = as_mat(out.grad_ptr(), n, out_dim);
      if (x.requires_grad()) {
        as_mat(x.grad_ptr(), n, in).noalias() += g * as_mat(w.ptr(), in, out_dim).transpose();
      }
      if (w.requires_grad()) {
        as_mat(w.grad_ptr(), in, out_dim).noalias() += as_mat(x.ptr(), n, in).transpose() * g;
      }
      if (has_bias && b.requires_grad()) {
        Eigen::Map<Eigen::Matrix<real, 1, Eigen::Dynamic>>(b.grad_ptr(), static_cast<Eigen::Index>(out_dim)) +=
            g.colwise().sum();
      }
    });
  }
  return out;
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out(a.shape());
  const std::size_t n = a.size();
  const real* pa = a.ptr();
  const real* pb = b.ptr();
  real* po = out.ptr();
  for (std::size_t i = 0; i < n; ++i) {
    po[i] = pa[i] + pb[i];
  }
  if (tape.wants({&a, &b})) {
    tape.record(out, [a, b, out, n]() mutable {
      const real* g = out.grad_ptr();
      // a and b may alias (y = x + x); accumulate each side separately.
      if (a.requires_grad()) {
        real* ga = a.grad_ptr();
        for (std::size_t i = 0; i < n; ++i) ga[i] += g[i];
      }
      if (b.requires_grad()) {
        real* gb = b.grad_ptr();
        for (std::size_t i = 0; i < n; ++i) gb[i] += g[i];
      }
    });
  }
  return out;
}

Tensor add_rows(Tape& tape, const Tensor& x, const Tensor& table, std::size_t period) {
  const std::size_t rows = x.rows(), cols = x.cols();
  if (table.cols() != cols || table.rows() < period || period == 0) {
    throw DimensionError("add_rows: input " + shape_str(x.shape()) + " vs table " +
                         shape_str(table.shape()) + " with period " + std::to_string(period));
  }
  Tensor out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const real* src = x.ptr() + r * cols;
    const real* t = table.ptr() + (r % period) * cols;
    real* dst = out.ptr() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) {
      dst[c] = src[c] + t[c];
    }
  }
  if (tape.wants({&x, &table})) {
    tape.record(out, [x, table, out, rows, cols, period]() mutable {
      const real* g = out.grad_ptr();
      if (x.requires_grad()) {
        real* gx = x.grad_ptr();
        for (std::size_t i = 0; i < rows * cols; ++i) gx[i] += g[i];
      }
      if (table.requires_grad()) {
        real* gt = table.grad_ptr();
        for (std::size_t r = 0; r < rows; ++r) {
          real* dst = gt + (r % period) * cols;
          const real* src = g + r * cols;
          for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
        }
      }
    });
  }
  return out;
}

Tensor scale(Tape& tape, const Tensor& x, real factor) {
  Tensor out(x.shape());
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = x[i] * factor;
  }
  if (tape.wants({&x})) {
    tape.record(out, [x, out, n, factor]() mutable {
      const real* g = out.grad_ptr();
      real* gx = x.grad_ptr();
      for (std::size_t i = 0; i < n; ++i) gx[i] += g[i] * factor;
    });
  }
  return out;
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor out(a.shape());
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = a[i] * b[i];
  }
  if (tape.wants({&a, &b})) {
    tape.record(out, [a, b, out, n]() mutable {
      const real* g = out.grad_ptr();
      if (a.requires_grad()) {
        real* ga = a.grad_ptr();
        for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * b[i];
      }
      if (b.requires_grad()) {
        real* gb = b.grad_ptr();
        for (std::size_t i = 0; i < n; ++i) gb[i] += g[i] * a[i];
      }
    });
  }
  return out;
}

Tensor sum(Tape& tape, const Tensor& x) {
  double acc = 0.0;
  for (real v : x.data()) {
    acc += v;
  }
  Tensor out = Tensor::scalar(static_cast<real>(acc));
  if (tape.wants({&x})) {
    tape.record(out, [x, out]() mutable {
      const real g = out.grad()[0];
      for (real& gx : x.grad()) gx += g;
    });
  }
  return out;
}

Tensor relu(Tape& tape, const Tensor& x) {
  Tensor out(x.shape());
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = x[i] > 0.0f ? x[i] : 0.0f;
  }
  if (tape.wants({&x})) {
    tape.record(out, [x, out, n]() mutable {
      const real* g = out.grad_ptr();
      real* gx = x.grad_ptr();
      for (std::size_t i = 0; i < n; ++i) {
        if (x[i] > 0.0f) gx[i] += g[i];
      }
    });
  }
  return out;
}

Tensor gelu(Tape& tape, const Tensor& x) {
  constexpr real kC = 0.7978845608028654f;  // sqrt(2/pi)
  constexpr real kA = 0.044715f;
  Tensor out(x.shape());
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i) {
    const real v = x[i];
    out[i] = 0.5f * v * (1.0f + std::tanh(kC * (v + kA * v * v * v)));
  }
  if (tape.wants({&x})) {
    tape.record(out, [x, out, n]() mutable {
      const real* g = out.grad_ptr();
      real* gx = x.grad_ptr();
      for (std::size_t i = 0; i < n; ++i) {
        const real v = x[i];
        const real t = std::tanh(kC * (v + kA * v * v * v));
        const real dt = (1.0f - t * t) * kC * (1.0f + 3.0f * kA * v * v);
        gx[i] += g[i] * (0.5f * (1.0f + t) + 0.5f * v * dt);
      }
    });
  }
  return out;
}

Tensor layer_norm(Tape& tape, const Tensor& x, const Tensor& gamma, const Tensor* beta_ptr,
                  real eps) {
  const std::size_t rows = x.rows(), cols = x.cols();
  const bool has_beta = beta_ptr != nullptr;
  Tensor beta = has_beta ? *beta_ptr : Tensor();
  if (gamma.size() != cols || (has_beta && beta.size() != cols)) {
    throw DimensionError("layer_norm: input " + shape_str(x.shape()) + " vs gain " +
                         shape_str(gamma.shape()));
  }
  Tensor out(x.shape());
  const bool track = tape.wants({&x, &gamma, beta_ptr});
  Tensor xhat = track ? Tensor(x.shape()) : Tensor();
  std::vector<real> inv_std(track ? rows : 0);
  std::vector<real> row_hat(cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const real* src = x.ptr() + r * cols;
    double mean = 0.0;
    for (std::size_t c = 0; c < cols; ++c) mean += src[c];
    mean /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double d = src[c] - mean;
      var += d * d;
    }
    var /= static_cast<double>(cols);
    const auto istd = static_cast<real>(1.0 / std::sqrt(var + eps));
    real* dst = out.ptr() + r * cols;
    real* hat = track ? xhat.ptr() + r * cols : row_hat.data();
    for (std::size_t c = 0; c < cols; ++c) {
      hat[c] = static_cast<real>(src[c] - mean) * istd;
      dst[c] = hat[c] * gamma[c] + (has_beta ? beta[c] : 0.0f);
    }
    if (track) inv_std[r] = istd;
  }
  if (track) {
    tape.record(out, [x, gamma, beta, has_beta, out, xhat, inv_std = std::move(inv_std), rows,
                      cols]() mutable {
      const real* g = out.grad_ptr();
      std::vector<real> dhat(cols);
      for (std::size_t r = 0; r < rows; ++r) {
        const real* gr = g + r * cols;
        const real* hat = xhat.ptr() + r * cols;
        if (gamma.requires_grad()) {
          real* gg = gamma.grad_ptr();
          for (std::size_t c = 0; c < cols; ++c) gg[c] += gr[c] * hat[c];
        }
        if (has_beta && beta.requires_grad()) {
          real* gb = beta.grad_ptr();
          for (std::size_t c = 0; c < cols; ++c) gb[c] += gr[c];
        }
        if (x.requires_grad()) {
          double mean_d = 0.0, mean_dh = 0.0;
          for (std::size_t c = 0; c < cols; ++c) {
            dhat[c] = gr[c] * gamma[c];
            mean_d += dhat[c];
            mean_dh += dhat[c] * hat[c];
          }
          mean_d /= static_cast<double>(cols);
          mean_dh /= static_cast<double>(cols);
          real* gx = x.grad_ptr() + r * cols;
          for (std::size_t c = 0; c < cols; ++c) {
            gx[c] += inv_std[r] * static_cast<real>(dhat[c] - mean_d - hat[c] * mean_dh);
          }
        }
      }
    });
  }
  return out;
}

Tensor embedding(Tape& tape, const Tensor& table, std::span<const int> ids) {
  const std::size_t vocab = table.rows(), d = table.cols();
  Tensor out({ids.size(), d});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab) {
      throw IndexError("embedding: token id " + std::to_string(ids[i]) + " outside vocabulary of " +
                       std::to_string(vocab));
    }
    std::copy_n(table.ptr() + static_cast<std::size_t>(ids[i]) * d, d, out.ptr() + i * d);
  }
  if (tape.wants({&table})) {
    std::vector<int> idv(ids.begin(), ids.end());
    tape.record(out, [table, out, idv = std::move(idv), d]() mutable {
      const real* g = out.grad_ptr();
      real* gt = table.grad_ptr();
      for (std::size_t i = 0; i < idv.size(); ++i) {
        real* dst = gt + static_cast<std::size_t>(idv[i]) * d;
        const real* src = g + i * d;
        for (std::size_t c = 0; c < d; ++c) dst[c] += src[c];
      }
    });
  }
  return out;
}

Tensor dropout(Tape& tape, const Tensor& x, real p, Rng* rng) {
  if (rng == nullptr || p <= 0.0f) {
    return x;
  }
  const std::size_t n = x.size();
  const real keep_scale = 1.0f / (1.0f - p);
  std::vector<real> mask(n);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < n; ++i) {
    mask[i] = rng->uniform() < p ? 0.0f : keep_scale;
    out[i] = x[i] * mask[i];
  }
  if (tape.wants({&x})) {
    tape.record(out, [x, out, mask = std::move(mask), n]() mutable {
      const real* g = out.grad_ptr();
      real* gx = x.grad_ptr();
      for (std::size_t i = 0; i < n; ++i) gx[i] += g[i] * mask[i];
    });
  }
  return out;
}

Tensor softmax_rows(Tape& tape, const Tensor& x) {
  require_finite(x, "softmax_rows");
  const std::size_t rows = x.rows(), cols = x.cols();
  Tensor out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const real* src = x.ptr() + r * cols;
    real* dst = out.ptr() + r * cols;
    const real mx = *std::max_element(src, src + cols);
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double e = std::exp(static_cast<double>(src[c]) - mx);
      dst[c] = static_cast<real>(e);
      total += e;
    }
    for (std::size_t c = 0; c < cols; ++c) {
      dst[c] = static_cast<real>(dst[c] / total);
    }
  }
  if (tape.wants({&x})) {
    tape.record(out, [x, out, rows, cols]() mutable {
      const real* g = out.grad_ptr();
      real* gx = x.grad_ptr();
      for (std::size_t r = 0; r < rows; ++r) {
        const real* y = out.ptr() + r * cols;
        const real* gr = g + r * cols;
        double dot = 0.0;
        for (std::size_t c = 0; c < cols; ++c) dot += static_cast<double>(gr[c]) * y[c];
        for (std::size_t c = 0; c < cols; ++c) {
          gx[r * cols + c] += y[c] * static_cast<real>(gr[c] - dot);
        }
      }
    });
  }
  return out;
}

Tensor attention(Tape& tape, const Tensor& q, const Tensor& k, const Tensor& v,
                 const AttentionSpec& spec) {
  const std::size_t d = q.cols();
  const std::size_t B = spec.batch, Tq = spec.q_len, Tk = spec.kv_len, H = spec.heads;
  if (H == 0 || d % H != 0) {
    throw DimensionError("attention: width " + std::to_string(d) + " not divisible by " +
                         std::to_string(H) + " heads");
  }
  if (q.rows() != B * Tq || k.rows() != B * Tk || v.rows() != B * Tk || k.cols() != d ||
      v.cols() != d) {
    throw DimensionError("attention: q " + shape_str(q.shape()) + ", k " + shape_str(k.shape()) +
                         ", v " + shape_str(v.shape()) + " inconsistent with batch " +
                         std::to_string(B));
  }
  if (spec.causal && Tq > Tk) {
    throw DimensionError("attention: causal mask needs q_len <= kv_len");
  }
  const std::size_t dh = d / H;
  const real inv_sqrt = 1.0f / std::sqrt(static_cast<real>(dh));
  const bool use_dropout = spec.rng != nullptr && spec.dropout > 0.0f;
  const real keep_scale = use_dropout ? 1.0f / (1.0f - spec.dropout) : 1.0f;
  // Causal offset lets a query at position i see keys up to i + (Tk - Tq).
  const std::size_t offset = Tk - Tq;

  Tensor out({B * Tq, d});
  const bool track = tape.wants({&q, &k, &v});
  // probs holds the softmax weights, keep the dropout multiplier per weight.
  std::vector<real> probs(track ? B * H * Tq * Tk : Tk);
  std::vector<real> keep(track && use_dropout ? B * H * Tq * Tk : 0);
  std::vector<real> row_keep(use_dropout ? Tk : 0);

  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t i = 0; i < Tq; ++i) {
        const std::size_t base = track ? ((b * H + h) * Tq + i) * Tk : 0;
        real* p = probs.data() + base;
        const real* qi = q.ptr() + (b * Tq + i) * d + h * dh;
        const std::size_t limit = spec.causal ? i + offset + 1 : Tk;
        real mx = -std::numeric_limits<real>::infinity();
        for (std::size_t j = 0; j < limit; ++j) {
          const real* kj = k.ptr() + (b * Tk + j) * d + h * dh;
          real s = 0.0f;
          for (std::size_t c = 0; c < dh; ++c) s += qi[c] * kj[c];
          s *= inv_sqrt;
          p[j] = s;
          mx = std::max(mx, s);
        }
        double total = 0.0;
        for (std::size_t j = 0; j < limit; ++j) {
          p[j] = std::exp(p[j] - mx);
          total += p[j];
        }
        const auto inv_total = static_cast<real>(1.0 / total);
        for (std::size_t j = 0; j < limit; ++j) p[j] *= inv_total;
        for (std::size_t j = limit; j < Tk; ++j) p[j] = 0.0f;

        real* kp = use_dropout ? (track ? keep.data() + base : row_keep.data()) : nullptr;
        if (kp) {
          for (std::size_t j = 0; j < Tk; ++j) {
            kp[j] = spec.rng->uniform() < spec.dropout ? 0.0f : keep_scale;
          }
        }
        real* oi = out.ptr() + (b * Tq + i) * d + h * dh;
        for (std::size_t j = 0; j < limit; ++j) {
          const real w = kp ? p[j] * kp[j] : p[j];
          if (w == 0.0f) continue;
          const real* vj = v.ptr() + (b * Tk + j) * d + h * dh;
          for (std::size_t c = 0; c < dh; ++c) oi[c] += w * vj[c];
        }
      }
    }
  }

  if (track) {
    tape.record(out, [q, k, v, out, probs = std::move(probs), keep = std::move(keep), B, Tq, Tk, H,
                      d, dh, inv_sqrt, causal = spec.causal, offset]() mutable {
      const real* g = out.grad_ptr();
      const bool need_q = q.requires_grad(), need_k = k.requires_grad(), need_v = v.requires_grad();
      std::vector<real> dp(Tk);
      for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t h = 0; h < H; ++h) {
          for (std::size_t i = 0; i < Tq; ++i) {
            const std::size_t base = ((b * H + h) * Tq + i) * Tk;
            const real* p = probs.data() + base;
            const real* kp = keep.empty() ? nullptr : keep.data() + base;
            const real* gi = g + (b * Tq + i) * d + h * dh;
            const real* qi = q.ptr() + (b * Tq + i) * d + h * dh;
            const std::size_t limit = causal ? i + offset + 1 : Tk;
            double dot = 0.0;
            for (std::size_t j = 0; j < limit; ++j) {
              const real* vj = v.ptr() + (b * Tk + j) * d + h * dh;
              real s = 0.0f;
              for (std::size_t c = 0; c < dh; ++c) s += gi[c] * vj[c];
              const real m = kp ? kp[j] : 1.0f;
              if (need_v) {
                const real w = p[j] * m;
                if (w != 0.0f) {
                  real* gv = v.grad_ptr() + (b * Tk + j) * d + h * dh;
                  for (std::size_t c = 0; c < dh; ++c) gv[c] += w * gi[c];
                }
              }
              dp[j] = s * m;
              dot += static_cast<double>(dp[j]) * p[j];
            }
            for (std::size_t j = 0; j < limit; ++j) {
              const real ds = p[j] * (dp[j] - static_cast<real>(dot)) * inv_sqrt;
              if (ds == 0.0f) continue;
              const real* kj = k.ptr() + (b * Tk + j) * d + h * dh;
              if (need_q) {
                real* gq = q.grad_ptr() + (b * Tq + i) * d + h * dh;
                for (std::size_t c = 0; c < dh; ++c) gq[c] += ds * kj[c];
              }
              if (need_k) {
                real* gk = k.grad_ptr() + (b * Tk + j) * d + h * dh;
                for (std::size_t c = 0; c < dh; ++c) gk[c] += ds * qi[c];
              }
            }
          }
        }
      }
    });
  }
  return out;
}

Tensor cross_entropy(Tape& tape, const Tensor& logits, std::span<const int> targets) {
  const std::size_t rows = logits.rows(), vocab = logits.cols();
  if (targets.size() != rows) {
    throw DimensionError("cross_entropy: " + std::to_string(rows) + " logit rows vs " +
                         std::to_string(targets.size()) + " targets");
  }
  std::size_t counted = 0;
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const int t = targets[r];
    if (t < 0) continue;
    if (static_cast<std::size_t>(t) >= vocab) {
      throw IndexError("cross_entropy: target " + std::to_string(t) + " outside vocabulary of " +
                       std::to_string(vocab));
    }
    const real* row = logits.ptr() + r * vocab;
    const real mx = *std::max_element(row, row + vocab);
    double z = 0.0;
    for (std::size_t c = 0; c < vocab; ++c) z += std::exp(static_cast<double>(row[c]) - mx);
    total += std::log(z) + mx - row[t];
    ++counted;
  }
  const double denom = counted ? static_cast<double>(counted) : 1.0;
  Tensor out = Tensor::scalar(static_cast<real>(total / denom));
  if (tape.wants({&logits})) {
    std::vector<int> tv(targets.begin(), targets.end());
    tape.record(out, [logits, out, tv = std::move(tv), rows, vocab, denom]() mutable {
      const auto g = static_cast<double>(out.grad()[0]) / denom;
      real* gl = logits.grad_ptr();
      for (std::size_t r = 0; r < rows; ++r) {
        if (tv[r] < 0) continue;
        const real* row = logits.ptr() + r * vocab;
        const real mx = *std::max_element(row, row + vocab);
        double z = 0.0;
        for (std::size_t c = 0; c < vocab; ++c) z += std::exp(static_cast<double>(row[c]) - mx);
        for (std::size_t c = 0; c < vocab; ++c) {
          double prob = std::exp(static_cast<double>(row[c]) - mx) / z;
          if (static_cast<int>(c) == tv[r]) prob -= 1.0;
          gl[r * vocab + c] += static_cast<real>(g * prob);
        }
      }
    });
  }
  return out;
}

Tensor transform_blocks(const Tensor& x, std::size_t block_rows, const BlockTransform& fn) {
  if (block_rows == 0 || x.rows() % block_rows != 0) {
    throw DimensionError("transform_blocks: " + std::to_string(x.rows()) +
                         " rows not divisible into blocks of " + std::to_string(block_rows));
  }
  Tensor out = x.clone();
  out.set_requires_grad(false);
  const std::size_t block = block_rows * x.cols();
  for (std::size_t start = 0; start < out.size(); start += block) {
    fn(out.data().subspan(start, block), block_rows);
  }
  return out;
}

}  // namespace arithlm::ops
