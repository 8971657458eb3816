#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "arithlm/ops.hpp"
#include "arithlm/rng.hpp"
#include "arithlm/tape.hpp"
#include "arithlm/tensor.hpp"

namespace arithlm {

enum class Family { EncoderDecoder, DecoderOnly };
enum class PositionalEncoding { Sinusoidal, Learned, None };

std::string to_string(Family f);
std::string to_string(PositionalEncoding pe);
Family family_from_string(const std::string& s);
PositionalEncoding positional_from_string(const std::string& s);

struct ModelConfig {
  Family family = Family::EncoderDecoder;
  std::size_t d_model = 64;
  std::size_t d_ff = 256;
  std::size_t num_heads = 8;
  std::size_t encoder_layers = 6;
  std::size_t decoder_layers = 6;
  real dropout = 0.1f;
  PositionalEncoding positional = PositionalEncoding::Sinusoidal;
  std::size_t vocab_size = 5;
  std::size_t max_positions = 32;
  /// Biases on linear maps and layer norms (the decoder-only family runs without).
  bool bias = true;
  bool squeeze_encoder = false;
  bool no_attention = false;
  bool no_ffn = false;

  /// Encoder-decoder, post-norm, sinusoidal positions.
  static ModelConfig encoder_decoder();
  /// nanoGPT-style decoder-only, pre-norm, learned positions.
  static ModelConfig decoder_only();

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// Per-layer outputs, each [batch*positions x d_model]. Row block b holds the
/// concatenated position embeddings of sample b.
struct LayerActivations {
  std::size_t batch = 0;
  std::size_t encoder_positions = 0;
  std::size_t decoder_positions = 0;
  std::vector<Tensor> enc;
  std::vector<Tensor> dec;

  /// Concatenated embedding of one sample at encoder layer `layer` (1-based).
  std::vector<real> enc_vector(std::size_t layer, std::size_t sample) const;
  std::vector<real> dec_vector(std::size_t layer, std::size_t sample) const;
};

/// Token ids for a batch of equally sized prompts and completions.
struct TokenBatch {
  std::size_t size = 0;
  std::size_t prompt_len = 0;
  std::size_t target_len = 0;
  std::vector<int> prompts;
  std::vector<int> targets;
};

struct PassOptions {
  bool training = false;
  Rng* dropout_rng = nullptr;
  bool capture = false;
};

struct ForwardResult {
  Tensor logits;  // [batch*target_len x vocab]
  LayerActivations activations;
};

struct DecoderHook {
  std::size_t layer = 0;  // 1-based decoder layer whose output is rewritten
  ops::BlockTransform transform;
};

class Model {
 public:
  Model(ModelConfig config, Rng& rng);

  const ModelConfig& config() const { return config_; }
  std::size_t parameter_count() const;

  std::vector<std::pair<std::string, Tensor>>& parameters() { return params_; }
  const std::vector<std::pair<std::string, Tensor>>& parameters() const { return params_; }
  Tensor& parameter(const std::string& name);
  const Tensor& parameter(const std::string& name) const;

  /// Teacher-forced pass: logits at output position j see the prompt and
  /// target tokens strictly before j.
  ForwardResult forward(Tape& tape, const TokenBatch& batch, const PassOptions& opts) const;

  /// Greedy decoding of `length` tokens for each prompt; ties go to the lowest id.
  std::vector<int> generate(std::span<const int> prompts, std::size_t prompt_len,
                            std::size_t length) const;

  /// Shallow copy sharing every parameter, with a decoder-layer rewrite installed.
  Model with_hook(DecoderHook hook) const;
  const std::optional<DecoderHook>& hook() const { return hook_; }

  void zero_grad();

 private:
  struct Linear {
    Tensor weight;
    std::optional<Tensor> bias;
  };
  struct Norm {
    Tensor gain;
    std::optional<Tensor> shift;
  };
  struct Attention {
    Linear q, k, v, o;
  };
  struct FeedForward {
    Linear in, out;
  };
  struct Layer {
    std::optional<Attention> self_attn;
    std::optional<Attention> cross_attn;
    std::optional<FeedForward> ffn;
    Norm norm1, norm2, norm3;
  };

  Linear make_linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng);
  Norm make_norm(const std::string& name);
  Attention make_attention(const std::string& name, Rng& rng);
  Tensor add_param(const std::string& name, Tensor t);

  Tensor apply(Tape& tape, const Linear& l, const Tensor& x) const;
  Tensor apply(Tape& tape, const Norm& n, const Tensor& x) const;
  Tensor apply_attention(Tape& tape, const Attention& a, const Tensor& x, const Tensor& memory,
                         std::size_t batch, std::size_t q_len, std::size_t kv_len, bool causal,
                         const PassOptions& opts) const;
  Tensor apply_ffn(Tape& tape, const FeedForward& f, const Tensor& x) const;
  Tensor embed(Tape& tape, const Tensor& table, std::span<const int> ids, std::size_t seq_len,
               const PassOptions& opts) const;
  Tensor drop(Tape& tape, const Tensor& x, const PassOptions& opts) const;

  Tensor encode(Tape& tape, std::span<const int> prompts, std::size_t batch, std::size_t len,
                const PassOptions& opts, LayerActivations* acts) const;
  Tensor decode_hidden(Tape& tape, std::span<const int> inputs, std::size_t batch,
                       std::size_t len, const Tensor& memory, std::size_t memory_len,
                       const PassOptions& opts, LayerActivations* acts) const;

  ModelConfig config_;
  std::vector<std::pair<std::string, Tensor>> params_;
  Tensor tok_src_, tok_tgt_, pos_table_;
  std::vector<Layer> enc_layers_, dec_layers_;
  std::optional<Norm> enc_norm_;
  Norm dec_norm_;
  Linear head_;
  std::optional<DecoderHook> hook_;
};

/// Fixed sinusoidal encoding: even dims sin(p / 10000^(2i/d)), odd dims cos.
std::vector<real> sinusoidal_pe(std::size_t position, std::size_t d_model);

Model build_model(const ModelConfig& config, Rng& rng);

ForwardResult forward_teacher_forced(const Model& model, std::span<const int> prompt,
                                     std::span<const int> target, bool capture = true);

std::vector<int> greedy_generate(const Model& model, std::span<const int> prompt,
                                 std::size_t length);

/// Installs `transform` on the output of decoder layer `layer` (1-based).
Model overwrite_layer_activations(const Model& model, std::size_t layer,
                                  ops::BlockTransform transform);

}  // namespace arithlm
