#include "arithlm/model.hpp"

#include <algorithm>
#include <cmath>

#include "arithlm/errors.hpp"
#include "arithlm/vocab.hpp"

namespace arithlm {

std::string to_string(Family f) {
  return f == Family::EncoderDecoder ? "encoder-decoder" : "decoder-only";
}

std::string to_string(PositionalEncoding pe) {
  switch (pe) {
    case PositionalEncoding::Sinusoidal:
      return "fixed-sinusoidal";
    case PositionalEncoding::Learned:
      return "learned";
    case PositionalEncoding::None:
      return "none";
  }
  return "none";
}

Family family_from_string(const std::string& s) {
  if (s == "encoder-decoder") return Family::EncoderDecoder;
  if (s == "decoder-only") return Family::DecoderOnly;
  throw ConfigError("unknown model family '" + s + "'");
}

PositionalEncoding positional_from_string(const std::string& s) {
  if (s == "fixed-sinusoidal" || s == "sinusoidal") return PositionalEncoding::Sinusoidal;
  if (s == "learned") return PositionalEncoding::Learned;
  if (s == "none") return PositionalEncoding::None;
  throw ConfigError("unknown positional encoding '" + s + "'");
}

ModelConfig ModelConfig::encoder_decoder() { return ModelConfig{}; }

ModelConfig ModelConfig::decoder_only() {
  ModelConfig c;
  c.family = Family::DecoderOnly;
  c.encoder_layers = 0;
  c.positional = PositionalEncoding::Learned;
  // Longest fed sequence: 15 prompt tokens + 14 product bits - 1.
  c.max_positions = 28;
  c.bias = false;
  return c;
}

void ModelConfig::validate() const {
  if (d_model == 0 || num_heads == 0 || d_model % num_heads != 0) {
    throw ConfigError("d_model " + std::to_string(d_model) + " not divisible by num_heads " +
                      std::to_string(num_heads));
  }
  if (d_ff == 0) throw ConfigError("d_ff must be positive");
  if (vocab_size != static_cast<std::size_t>(vocab::kSize)) {
    throw ConfigError("vocab_size must be 5, got " + std::to_string(vocab_size));
  }
  if (dropout < 0.0f || dropout >= 1.0f) throw ConfigError("dropout must lie in [0, 1)");
  if (max_positions == 0) throw ConfigError("max_positions must be positive");
  if (family == Family::DecoderOnly && (encoder_layers != 0 || squeeze_encoder)) {
    throw ConfigError("decoder-only family has no encoder");
  }
}

std::vector<real> LayerActivations::enc_vector(std::size_t layer, std::size_t sample) const {
  if (layer == 0 || layer > enc.size()) {
    throw RangeError("encoder layer " + std::to_string(layer) + " outside 1.." +
                     std::to_string(enc.size()));
  }
  const Tensor& t = enc[layer - 1];
  const std::size_t width = encoder_positions * t.cols();
  auto first = t.data().begin() + static_cast<std::ptrdiff_t>(sample * width);
  return {first, first + static_cast<std::ptrdiff_t>(width)};
}

std::vector<real> LayerActivations::dec_vector(std::size_t layer, std::size_t sample) const {
  if (layer == 0 || layer > dec.size()) {
    throw RangeError("decoder layer " + std::to_string(layer) + " outside 1.." +
                     std::to_string(dec.size()));
  }
  const Tensor& t = dec[layer - 1];
  const std::size_t width = decoder_positions * t.cols();
  auto first = t.data().begin() + static_cast<std::ptrdiff_t>(sample * width);
  return {first, first + static_cast<std::ptrdiff_t>(width)};
}

std::vector<real> sinusoidal_pe(std::size_t position, std::size_t d_model) {
  std::vector<real> pe(d_model);
  for (std::size_t i = 0; i < d_model; i += 2) {
    const double rate = std::pow(10000.0, static_cast<double>(i) / static_cast<double>(d_model));
    const double angle = static_cast<double>(position) / rate;
    pe[i] = static_cast<real>(std::sin(angle));
    if (i + 1 < d_model) {
      pe[i + 1] = static_cast<real>(std::cos(angle));
    }
  }
  return pe;
}

Tensor Model::add_param(const std::string& name, Tensor t) {
  t.set_requires_grad(true);
  params_.emplace_back(name, t);
  return t;
}

Model::Linear Model::make_linear(const std::string& name, std::size_t in, std::size_t out,
                                 Rng& rng) {
  const real bound = 1.0f / std::sqrt(static_cast<real>(in));
  Tensor w({in, out});
  for (real& v : w.data()) v = rng.uniform(-bound, bound);
  Linear l{add_param(name + ".weight", w), std::nullopt};
  if (config_.bias) {
    Tensor b({out});
    for (real& v : b.data()) v = rng.uniform(-bound, bound);
    l.bias = add_param(name + ".bias", b);
  }
  return l;
}

Model::Norm Model::make_norm(const std::string& name) {
  Norm n{add_param(name + ".weight", Tensor({config_.d_model}, 1.0f)), std::nullopt};
  if (config_.bias) {
    n.shift = add_param(name + ".bias", Tensor({config_.d_model}, 0.0f));
  }
  return n;
}

Model::Attention Model::make_attention(const std::string& name, Rng& rng) {
  const std::size_t d = config_.d_model;
  return Attention{make_linear(name + ".q", d, d, rng), make_linear(name + ".k", d, d, rng),
                   make_linear(name + ".v", d, d, rng), make_linear(name + ".o", d, d, rng)};
}

Model::Model(ModelConfig config, Rng& rng) : config_(std::move(config)) {
  config_.validate();
  const std::size_t d = config_.d_model, V = config_.vocab_size;
  const real emb_std = 1.0f / std::sqrt(static_cast<real>(d));
  auto embedding_table = [&](const std::string& name, std::size_t rows) {
    Tensor t({rows, d});
    for (real& v : t.data()) v = rng.normal() * emb_std;
    return add_param(name, t);
  };

  auto make_ffn = [&](const std::string& name) {
    return FeedForward{make_linear(name + ".in", d, config_.d_ff, rng),
                       make_linear(name + ".out", config_.d_ff, d, rng)};
  };

  if (config_.family == Family::EncoderDecoder) {
    tok_src_ = embedding_table("encoder.embed", V);
    tok_tgt_ = embedding_table("decoder.embed", V);
    if (!config_.squeeze_encoder) {
      for (std::size_t i = 0; i < config_.encoder_layers; ++i) {
        const std::string p = "encoder.layers." + std::to_string(i);
        Layer layer;
        if (!config_.no_attention) layer.self_attn = make_attention(p + ".self_attn", rng);
        layer.norm1 = make_norm(p + ".norm1");
        if (!config_.no_ffn) layer.ffn = make_ffn(p + ".ffn");
        layer.norm2 = make_norm(p + ".norm2");
        enc_layers_.push_back(std::move(layer));
      }
      enc_norm_ = make_norm("encoder.norm");
    }
    for (std::size_t i = 0; i < config_.decoder_layers; ++i) {
      const std::string p = "decoder.layers." + std::to_string(i);
      Layer layer;
      if (!config_.no_attention) layer.self_attn = make_attention(p + ".self_attn", rng);
      layer.norm1 = make_norm(p + ".norm1");
      if (!config_.no_attention) layer.cross_attn = make_attention(p + ".cross_attn", rng);
      layer.norm2 = make_norm(p + ".norm2");
      if (!config_.no_ffn) layer.ffn = make_ffn(p + ".ffn");
      layer.norm3 = make_norm(p + ".norm3");
      dec_layers_.push_back(std::move(layer));
    }
  } else {
    tok_tgt_ = embedding_table("decoder.embed", V);
    if (config_.positional == PositionalEncoding::Learned) {
      pos_table_ = embedding_table("decoder.pos_embed", config_.max_positions);
    }
    for (std::size_t i = 0; i < config_.decoder_layers; ++i) {
      const std::string p = "decoder.layers." + std::to_string(i);
      Layer layer;
      layer.norm1 = make_norm(p + ".norm1");
      if (!config_.no_attention) layer.self_attn = make_attention(p + ".self_attn", rng);
      layer.norm2 = make_norm(p + ".norm2");
      if (!config_.no_ffn) layer.ffn = make_ffn(p + ".ffn");
      dec_layers_.push_back(std::move(layer));
    }
  }
  dec_norm_ = make_norm("decoder.norm");
  head_ = make_linear("head", d, V, rng);

  if (config_.family == Family::EncoderDecoder) {
    if (config_.positional == PositionalEncoding::Learned) {
      // Shared between encoder and decoder streams.
      pos_table_ = embedding_table("pos_embed", config_.max_positions);
    } else if (config_.positional == PositionalEncoding::Sinusoidal) {
      pos_table_ = Tensor({config_.max_positions, d});
      for (std::size_t p = 0; p < config_.max_positions; ++p) {
        auto row = sinusoidal_pe(p, d);
        std::copy(row.begin(), row.end(), pos_table_.ptr() + p * d);
      }
    }
  }
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : params_) n += t.size();
  return n;
}

Tensor& Model::parameter(const std::string& name) {
  for (auto& [n, t] : params_) {
    if (n == name) return t;
  }
  throw ContractError("no parameter named '" + name + "'");
}

const Tensor& Model::parameter(const std::string& name) const {
  return const_cast<Model*>(this)->parameter(name);
}

void Model::zero_grad() {
  for (auto& [name, t] : params_) t.zero_grad();
}

Model Model::with_hook(DecoderHook hook) const {
  if (hook.layer == 0 || hook.layer > config_.decoder_layers) {
    throw RangeError("decoder layer " + std::to_string(hook.layer) + " outside 1.." +
                     std::to_string(config_.decoder_layers));
  }
  Model copy = *this;
  copy.hook_ = std::move(hook);
  return copy;
}

Tensor Model::apply(Tape& tape, const Linear& l, const Tensor& x) const {
  return ops::linear(tape, x, l.weight, l.bias ? &*l.bias : nullptr);
}

Tensor Model::apply(Tape& tape, const Norm& n, const Tensor& x) const {
  return ops::layer_norm(tape, x, n.gain, n.shift ? &*n.shift : nullptr);
}

Tensor Model::drop(Tape& tape, const Tensor& x, const PassOptions& opts) const {
  if (!opts.training) return x;
  return ops::dropout(tape, x, config_.dropout, opts.dropout_rng);
}

Tensor Model::apply_attention(Tape& tape, const Attention& a, const Tensor& x,
                              const Tensor& memory, std::size_t batch, std::size_t q_len,
                              std::size_t kv_len, bool causal, const PassOptions& opts) const {
  Tensor q = apply(tape, a.q, x);
  Tensor k = apply(tape, a.k, memory);
  Tensor v = apply(tape, a.v, memory);
  ops::AttentionSpec spec;
  spec.batch = batch;
  spec.q_len = q_len;
  spec.kv_len = kv_len;
  spec.heads = config_.num_heads;
  spec.causal = causal;
  if (opts.training) {
    spec.dropout = config_.dropout;
    spec.rng = opts.dropout_rng;
  }
  return apply(tape, a.o, ops::attention(tape, q, k, v, spec));
}

Tensor Model::apply_ffn(Tape& tape, const FeedForward& f, const Tensor& x) const {
  Tensor h = apply(tape, f.in, x);
  h = config_.family == Family::EncoderDecoder ? ops::relu(tape, h) : ops::gelu(tape, h);
  return apply(tape, f.out, h);
}

Tensor Model::embed(Tape& tape, const Tensor& table, std::span<const int> ids,
                    std::size_t seq_len, const PassOptions& opts) const {
  if (seq_len > config_.max_positions) {
    throw RangeError("sequence of " + std::to_string(seq_len) + " tokens exceeds max_positions " +
                     std::to_string(config_.max_positions));
  }
  Tensor x = ops::embedding(tape, table, ids);
  if (config_.family == Family::EncoderDecoder) {
    x = ops::scale(tape, x, std::sqrt(static_cast<real>(config_.d_model)));
  }
  if (config_.positional != PositionalEncoding::None) {
    x = ops::add_rows(tape, x, pos_table_, seq_len);
  }
  return drop(tape, x, opts);
}

Tensor Model::encode(Tape& tape, std::span<const int> prompts, std::size_t batch, std::size_t len,
                     const PassOptions& opts, LayerActivations* acts) const {
  Tensor x = embed(tape, tok_src_, prompts, len, opts);
  for (const Layer& layer : enc_layers_) {
    if (layer.self_attn) {
      Tensor a = apply_attention(tape, *layer.self_attn, x, x, batch, len, len, false, opts);
      x = ops::add(tape, x, drop(tape, a, opts));
    }
    x = apply(tape, layer.norm1, x);
    if (layer.ffn) {
      x = ops::add(tape, x, drop(tape, apply_ffn(tape, *layer.ffn, x), opts));
    }
    x = apply(tape, layer.norm2, x);
    if (acts) acts->enc.push_back(x);
  }
  if (enc_norm_) x = apply(tape, *enc_norm_, x);
  return x;
}

Tensor Model::decode_hidden(Tape& tape, std::span<const int> inputs, std::size_t batch,
                            std::size_t len, const Tensor& memory, std::size_t memory_len,
                            const PassOptions& opts, LayerActivations* acts) const {
  Tensor x = embed(tape, tok_tgt_, inputs, len, opts);
  std::size_t index = 0;
  for (const Layer& layer : dec_layers_) {
    ++index;
    if (config_.family == Family::EncoderDecoder) {
      if (layer.self_attn) {
        Tensor a = apply_attention(tape, *layer.self_attn, x, x, batch, len, len, true, opts);
        x = ops::add(tape, x, drop(tape, a, opts));
      }
      x = apply(tape, layer.norm1, x);
      if (layer.cross_attn) {
        Tensor a = apply_attention(tape, *layer.cross_attn, x, memory, batch, len, memory_len,
                                   false, opts);
        x = ops::add(tape, x, drop(tape, a, opts));
      }
      x = apply(tape, layer.norm2, x);
      if (layer.ffn) {
        x = ops::add(tape, x, drop(tape, apply_ffn(tape, *layer.ffn, x), opts));
      }
      x = apply(tape, layer.norm3, x);
    } else {
      if (layer.self_attn) {
        Tensor h = apply(tape, layer.norm1, x);
        Tensor a = apply_attention(tape, *layer.self_attn, h, h, batch, len, len, true, opts);
        x = ops::add(tape, x, drop(tape, a, opts));
      }
      if (layer.ffn) {
        Tensor h = apply(tape, layer.norm2, x);
        x = ops::add(tape, x, drop(tape, apply_ffn(tape, *layer.ffn, h), opts));
      }
    }
    if (hook_ && hook_->layer == index) {
      x = ops::transform_blocks(x, len, hook_->transform);
    }
    if (acts) acts->dec.push_back(x);
  }
  return apply(tape, dec_norm_, x);
}

namespace {

void check_tokens(std::span<const int> ids, std::size_t vocab) {
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
      throw IndexError("token id " + std::to_string(id) + " outside vocabulary of " +
                       std::to_string(vocab));
    }
  }
}

Tensor select_rows(Tape& tape, const Tensor& x, std::vector<std::size_t> rows) {
  const std::size_t cols = x.cols();
  Tensor out({rows.size(), cols});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(x.ptr() + rows[i] * cols, cols, out.ptr() + i * cols);
  }
  if (tape.wants({&x})) {
    tape.record(out, [x, out, rows = std::move(rows), cols]() mutable {
      const real* g = out.grad_ptr();
      real* gx = x.grad_ptr();
      for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t c = 0; c < cols; ++c) gx[rows[i] * cols + c] += g[i * cols + c];
      }
    });
  }
  return out;
}

int argmax_lowest(const real* row, std::size_t n) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < n; ++c) {
    if (row[c] > row[best]) best = c;
  }
  return static_cast<int>(best);
}

}  // namespace

ForwardResult Model::forward(Tape& tape, const TokenBatch& batch, const PassOptions& opts) const {
  const std::size_t B = batch.size, Tp = batch.prompt_len, m = batch.target_len;
  if (batch.prompts.size() != B * Tp || batch.targets.size() != B * m || m == 0) {
    throw DimensionError("token batch inconsistent with its declared sizes");
  }
  check_tokens(batch.prompts, config_.vocab_size);
  check_tokens(batch.targets, config_.vocab_size);

  ForwardResult result;
  LayerActivations* acts = opts.capture ? &result.activations : nullptr;
  if (acts) acts->batch = B;

  if (config_.family == Family::EncoderDecoder) {
    Tensor memory = encode(tape, batch.prompts, B, Tp, opts, acts);
    std::vector<int> dec_in(B * m);
    for (std::size_t b = 0; b < B; ++b) {
      dec_in[b * m] = vocab::kStart;
      for (std::size_t j = 1; j < m; ++j) dec_in[b * m + j] = batch.targets[b * m + j - 1];
    }
    if (acts) {
      acts->encoder_positions = Tp;
      acts->decoder_positions = m;
    }
    Tensor h = decode_hidden(tape, dec_in, B, m, memory, Tp, opts, acts);
    result.logits = apply(tape, head_, h);
  } else {
    const std::size_t L = Tp + m - 1;
    std::vector<int> seq(B * L);
    std::vector<std::size_t> rows;
    rows.reserve(B * m);
    for (std::size_t b = 0; b < B; ++b) {
      std::copy_n(batch.prompts.begin() + static_cast<std::ptrdiff_t>(b * Tp), Tp,
                  seq.begin() + static_cast<std::ptrdiff_t>(b * L));
      std::copy_n(batch.targets.begin() + static_cast<std::ptrdiff_t>(b * m), m - 1,
                  seq.begin() + static_cast<std::ptrdiff_t>(b * L + Tp));
      for (std::size_t j = 0; j < m; ++j) rows.push_back(b * L + Tp - 1 + j);
    }
    if (acts) acts->decoder_positions = L;
    Tensor h = decode_hidden(tape, seq, B, L, Tensor(), 0, opts, acts);
    result.logits = apply(tape, head_, select_rows(tape, h, std::move(rows)));
  }
  return result;
}

std::vector<int> Model::generate(std::span<const int> prompts, std::size_t prompt_len,
                                 std::size_t length) const {
  if (length == 0) throw ContractError("generate: output length must be positive");
  if (prompt_len == 0 || prompts.size() % prompt_len != 0) {
    throw DimensionError("generate: prompt buffer not a multiple of prompt length");
  }
  check_tokens(prompts, config_.vocab_size);
  const std::size_t B = prompts.size() / prompt_len;
  const std::size_t V = config_.vocab_size;
  Tape tape(false);
  PassOptions opts;
  std::vector<int> out(B * length);

  if (config_.family == Family::EncoderDecoder) {
    Tensor memory = encode(tape, prompts, B, prompt_len, opts, nullptr);
    for (std::size_t step = 0; step < length; ++step) {
      const std::size_t T = step + 1;
      std::vector<int> dec_in(B * T);
      for (std::size_t b = 0; b < B; ++b) {
        dec_in[b * T] = vocab::kStart;
        for (std::size_t j = 1; j < T; ++j) dec_in[b * T + j] = out[b * length + j - 1];
      }
      Tensor h = decode_hidden(tape, dec_in, B, T, memory, prompt_len, opts, nullptr);
      std::vector<std::size_t> last(B);
      for (std::size_t b = 0; b < B; ++b) last[b] = b * T + T - 1;
      Tensor logits = apply(tape, head_, select_rows(tape, h, std::move(last)));
      for (std::size_t b = 0; b < B; ++b) {
        out[b * length + step] = argmax_lowest(logits.ptr() + b * V, V);
      }
    }
  } else {
    for (std::size_t step = 0; step < length; ++step) {
      const std::size_t T = prompt_len + step;
      std::vector<int> seq(B * T);
      for (std::size_t b = 0; b < B; ++b) {
        std::copy_n(prompts.begin() + static_cast<std::ptrdiff_t>(b * prompt_len), prompt_len,
                    seq.begin() + static_cast<std::ptrdiff_t>(b * T));
        for (std::size_t j = 0; j < step; ++j) seq[b * T + prompt_len + j] = out[b * length + j];
      }
      Tensor h = decode_hidden(tape, seq, B, T, Tensor(), 0, opts, nullptr);
      std::vector<std::size_t> last(B);
      for (std::size_t b = 0; b < B; ++b) last[b] = b * T + T - 1;
      Tensor logits = apply(tape, head_, select_rows(tape, h, std::move(last)));
      for (std::size_t b = 0; b < B; ++b) {
        out[b * length + step] = argmax_lowest(logits.ptr() + b * V, V);
      }
    }
  }
  return out;
}

Model build_model(const ModelConfig& config, Rng& rng) { return Model(config, rng); }

ForwardResult forward_teacher_forced(const Model& model, std::span<const int> prompt,
                                     std::span<const int> target, bool capture) {
  TokenBatch batch;
  batch.size = 1;
  batch.prompt_len = prompt.size();
  batch.target_len = target.size();
  batch.prompts.assign(prompt.begin(), prompt.end());
  batch.targets.assign(target.begin(), target.end());
  Tape tape(false);
  PassOptions opts;
  opts.capture = capture;
  return model.forward(tape, batch, opts);
}

std::vector<int> greedy_generate(const Model& model, std::span<const int> prompt,
                                 std::size_t length) {
  return model.generate(prompt, prompt.size(), length);
}

Model overwrite_layer_activations(const Model& model, std::size_t layer,
                                  ops::BlockTransform transform) {
  return model.with_hook(DecoderHook{layer, std::move(transform)});
}

}  // namespace arithlm
