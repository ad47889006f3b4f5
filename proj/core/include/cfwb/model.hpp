// Copyright (c) 2026 The cfwb Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cfwb/attention.hpp"
#include "cfwb/ops.hpp"
#include "cfwb/patterns.hpp"

namespace cfwb {

enum class MaskKind { kFull, kStrided, kLogSparse };

std::string to_string(MaskKind kind);
MaskKind mask_kind_from_string(const std::string& name);
SparsityPattern make_pattern(MaskKind kind, std::size_t n);

struct TransformerConfig {
  std::size_t d_model = 32;
  std::size_t heads = 2;
  std::size_t d_k = 16;
  std::size_t d_v = 16;
  std::size_t d_ff = 64;
  std::size_t n_layers = 2;
  MaskKind mask_kind = MaskKind::kFull;
  std::size_t conv_k = 1;      // 1 = canonical linear Q/K projections
  std::size_t vocab_size = 0;  // token models
  std::size_t input_dim = 0;   // real-valued models
  std::size_t max_len = 512;
  std::uint64_t seed = 0;

  void validate() const;  // enforces d_model == heads * d_v, conv_k >= 1, ...

  std::map<std::string, std::string> to_kv() const;
  static TransformerConfig from_kv(const std::map<std::string, std::string>& kv);
};

// PE[pos, 2i] = sin(pos / 10000^(2i/d_model)), PE[pos, 2i+1] = cos(same).
Tensor sinusoidal_pe(std::size_t n, std::size_t d_model);

struct LayerNormParams {
  Tensor gain;
  Tensor bias;
  static LayerNormParams init(std::size_t n);
};

struct FfnParams {
  Tensor w1;  // (d_model x d_ff)
  Tensor b1;  // (d_ff)
  Tensor w2;  // (d_ff x d_model)
  Tensor b2;  // (d_model)
  std::vector<Tensor> parameters() const;
  static FfnParams init(std::size_t d_model, std::size_t d_ff, Rng& rng);
};

// Position-wise feed-forward: row t of the output depends only on row t of
// the input; GELU between the two linear maps.
Tensor pointwise_ffn(const Tensor& x, const Tensor& w1, const Tensor& b1, const Tensor& w2,
                     const Tensor& b2);
Tensor pointwise_ffn(const Tensor& x, const FfnParams& p);

struct DecoderBlockParams {
  LayerNormParams ln1;
  AttentionWeights attn;
  std::optional<LayerNormParams> ln_cross;
  std::optional<AttentionWeights> cross_attn;
  LayerNormParams ln2;
  FfnParams ffn;

  std::vector<Tensor> parameters() const;
  static DecoderBlockParams init(const TransformerConfig& cfg, Rng& rng, bool with_cross);
};

// Pre-norm residual block: x + Attn(LN(x)), then + FFN(LN(.)). When enc_out
// is given a cross-attention sublayer (queries from the stream, keys/values
// from enc_out, no mask) runs between self-attention and the FFN.
Tensor decoder_block(const Tensor& x, const DecoderBlockParams& p, const SparsityPattern* pattern,
                     const Tensor* enc_out = nullptr);

// Decoder-only autoregressive token model: embedding + positional encoding +
// n_layers pre-norm blocks + final vocabulary projection.
class GptModel {
 public:
  GptModel(TransformerConfig cfg, Rng rng);

  // logits[t] depends only on tokens[0..t].
  Tensor forward(const std::vector<int>& tokens) const;

  const TransformerConfig& config() const { return cfg_; }
  std::vector<Tensor> parameters() const;
  std::vector<std::pair<std::string, Tensor>> named_parameters() const;
  void load_named_parameters(const std::vector<std::pair<std::string, Tensor>>& named);

 private:
  TransformerConfig cfg_;
  Tensor token_table_;  // (V x d_model)
  Tensor pe_;           // (max_len x d_model), constant
  std::vector<DecoderBlockParams> blocks_;
  Tensor w_out_;  // (d_model x V)
};

// Encoder-decoder: real-valued source sequence, token target sequence.
// Decoder self-attention is causal; cross-attention sees every encoder
// position.
class EncoderDecoderModel {
 public:
  EncoderDecoderModel(TransformerConfig cfg, Rng rng);

  Tensor forward(const Tensor& src, const std::vector<int>& tgt_tokens) const;

  const TransformerConfig& config() const { return cfg_; }
  std::vector<Tensor> parameters() const;

 private:
  TransformerConfig cfg_;
  Tensor w_src_in_;  // (input_dim x d_model)
  std::vector<DecoderBlockParams> enc_blocks_;  // self-attention only, no mask
  Tensor token_table_;
  Tensor pe_;
  std::vector<DecoderBlockParams> dec_blocks_;  // causal self + cross
  Tensor w_out_;
};

// Decoder-only forecaster over a real-valued window. The window is shifted by
// its final value before embedding and the head predicts the next-step delta,
// so the model is translation invariant along the value axis; the returned
// scalar is last + delta (still plain next-value regression to the caller).
class TransformerForecaster {
 public:
  TransformerForecaster(TransformerConfig cfg, Rng rng);

  Tensor predict_next(const std::vector<double>& window) const;

  const TransformerConfig& config() const { return cfg_; }
  std::vector<Tensor> parameters() const;
  std::vector<std::pair<std::string, Tensor>> named_parameters() const;
  void load_named_parameters(const std::vector<std::pair<std::string, Tensor>>& named);

 private:
  TransformerConfig cfg_;
  Tensor w_in_;  // (1 x d_model)
  Tensor pe_;
  std::vector<DecoderBlockParams> blocks_;
  Tensor w_head_;  // (d_model x 1)
  Tensor b_head_;  // (1)
};

// Encoder-decoder forecaster variant: the encoder reads the shifted window,
// one decoder query cross-attends it to produce the delta.
class EncDecForecaster {
 public:
  EncDecForecaster(TransformerConfig cfg, Rng rng);

  Tensor predict_next(const std::vector<double>& window) const;

  const TransformerConfig& config() const { return cfg_; }
  std::vector<Tensor> parameters() const;
  std::vector<std::pair<std::string, Tensor>> named_parameters() const;
  void load_named_parameters(const std::vector<std::pair<std::string, Tensor>>& named);

 private:
  TransformerConfig cfg_;
  Tensor w_in_;
  Tensor pe_;
  std::vector<DecoderBlockParams> enc_blocks_;
  Tensor query_seed_;  // (1 x d_model), learned decoder query
  std::vector<DecoderBlockParams> dec_blocks_;
  Tensor w_head_;
  Tensor b_head_;
};

namespace detail {
std::vector<std::pair<std::string, Tensor>> block_named_params(const std::string& prefix,
                                                               const DecoderBlockParams& p);
}  // namespace detail

}  // namespace cfwb
