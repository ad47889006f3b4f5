// Copyright (c) 2026 The cfwb Authors
// SPDX-License-Identifier: Apache-2.0

#include "cfwb/model.hpp"

#include <cmath>

namespace cfwb {

std::string to_string(MaskKind kind) {
  switch (kind) {
    case MaskKind::kFull: return "full";
    case MaskKind::kStrided: return "strided";
    case MaskKind::kLogSparse: return "logsparse";
  }
  throw ConfigError("unknown mask kind");
}

MaskKind mask_kind_from_string(const std::string& name) {
  if (name == "full") return MaskKind::kFull;
  if (name == "strided") return MaskKind::kStrided;
  if (name == "logsparse") return MaskKind::kLogSparse;
  throw ConfigError("unknown mask kind '" + name + "' (expected full|strided|logsparse)");
}

SparsityPattern make_pattern(MaskKind kind, std::size_t n) {
  switch (kind) {
    case MaskKind::kFull: return full_causal_pattern(n);
    case MaskKind::kStrided: return strided_sparse_pattern(n);
    case MaskKind::kLogSparse: return logsparse_pattern(n);
  }
  throw ConfigError("unknown mask kind");
}

void TransformerConfig::validate() const {
  if (d_model == 0 || heads == 0 || d_k == 0 || d_v == 0 || d_ff == 0) {
    throw ConfigError("transformer config: dimensions must be positive");
  }
  if (d_model != heads * d_v) {
    throw ConfigError("transformer config: d_model (" + std::to_string(d_model) +
                      ") must equal heads*d_v (" + std::to_string(heads * d_v) + ")");
  }
  if (d_model % 2 != 0) {
    throw ConfigError("transformer config: d_model must be even for sinusoidal encodings");
  }
  if (conv_k == 0) throw ConfigError("transformer config: conv_k must be >= 1");
  if (max_len == 0) throw ConfigError("transformer config: max_len must be >= 1");
  if (vocab_size == 0 && input_dim == 0) {
    throw ConfigError("transformer config: either vocab_size or input_dim must be set");
  }
}

std::map<std::string, std::string> TransformerConfig::to_kv() const {
  return {
      {"d_model", std::to_string(d_model)},   {"heads", std::to_string(heads)},
      {"d_k", std::to_string(d_k)},           {"d_v", std::to_string(d_v)},
      {"d_ff", std::to_string(d_ff)},         {"n_layers", std::to_string(n_layers)},
      {"mask_kind", to_string(mask_kind)},    {"conv_k", std::to_string(conv_k)},
      {"vocab_size", std::to_string(vocab_size)}, {"input_dim", std::to_string(input_dim)},
      {"max_len", std::to_string(max_len)},   {"seed", std::to_string(seed)},
  };
}

TransformerConfig TransformerConfig::from_kv(const std::map<std::string, std::string>& kv) {
  TransformerConfig cfg;
  auto get = [&kv](const std::string& key) -> std::string {
    auto it = kv.find(key);
    if (it == kv.end()) throw FormatError("config: missing key '" + key + "'");
    return it->second;
  };
  cfg.d_model = std::stoul(get("d_model"));
  cfg.heads = std::stoul(get("heads"));
  cfg.d_k = std::stoul(get("d_k"));
  cfg.d_v = std::stoul(get("d_v"));
  cfg.d_ff = std::stoul(get("d_ff"));
  cfg.n_layers = std::stoul(get("n_layers"));
  cfg.mask_kind = mask_kind_from_string(get("mask_kind"));
  cfg.conv_k = std::stoul(get("conv_k"));
  cfg.vocab_size = std::stoul(get("vocab_size"));
  cfg.input_dim = std::stoul(get("input_dim"));
  cfg.max_len = std::stoul(get("max_len"));
  cfg.seed = std::stoull(get("seed"));
  return cfg;
}

Tensor sinusoidal_pe(std::size_t n, std::size_t d_model) {
  if (d_model % 2 != 0) {
    throw ConfigError("sinusoidal_pe: d_model must be even, got " + std::to_string(d_model));
  }
  if (n == 0) throw ConfigError("sinusoidal_pe: n must be >= 1");
  std::vector<double> pe(n * d_model);
  for (std::size_t pos = 0; pos < n; ++pos) {
    for (std::size_t i = 0; i < d_model / 2; ++i) {
      const double rate =
          std::pow(10000.0, -(2.0 * static_cast<double>(i)) / static_cast<double>(d_model));
      const double angle = static_cast<double>(pos) * rate;
      pe[pos * d_model + 2 * i] = std::sin(angle);
      pe[pos * d_model + 2 * i + 1] = std::cos(angle);
    }
  }
  return Tensor::from_data({n, d_model}, std::move(pe));
}

LayerNormParams LayerNormParams::init(std::size_t n) {
  return {Tensor::filled({n}, 1.0, true), Tensor::zeros({n}, true)};
}

FfnParams FfnParams::init(std::size_t d_model, std::size_t d_ff, Rng& rng) {
  FfnParams p;
  p.w1 = xavier_uniform({d_model, d_ff}, d_model, d_ff, rng);
  p.b1 = Tensor::zeros({d_ff}, true);
  p.w2 = xavier_uniform({d_ff, d_model}, d_ff, d_model, rng);
  p.b2 = Tensor::zeros({d_model}, true);
  return p;
}

Tensor pointwise_ffn(const Tensor& x, const Tensor& w1, const Tensor& b1, const Tensor& w2,
                     const Tensor& b2) {
  Tensor h = gelu(add_bias_rows(matmul(x, w1), b1));
  return add_bias_rows(matmul(h, w2), b2);
}

Tensor pointwise_ffn(const Tensor& x, const FfnParams& p) {
  return pointwise_ffn(x, p.w1, p.b1, p.w2, p.b2);
}

std::vector<Tensor> DecoderBlockParams::parameters() const {
  std::vector<Tensor> ps;
  ps.push_back(ln1.gain);
  ps.push_back(ln1.bias);
  for (const auto& t : attn.parameters()) ps.push_back(t);
  if (cross_attn) {
    ps.push_back(ln_cross->gain);
    ps.push_back(ln_cross->bias);
    for (const auto& t : cross_attn->parameters()) ps.push_back(t);
  }
  ps.push_back(ln2.gain);
  ps.push_back(ln2.bias);
  for (const auto& t : ffn.parameters()) ps.push_back(t);
  return ps;
}

std::vector<Tensor> FfnParams::parameters() const { return {w1, b1, w2, b2}; }

DecoderBlockParams DecoderBlockParams::init(const TransformerConfig& cfg, Rng& rng,
                                            bool with_cross) {
  DecoderBlockParams p;
  p.ln1 = LayerNormParams::init(cfg.d_model);
  p.attn = AttentionWeights::init(cfg.d_model, cfg.heads, cfg.d_k, cfg.d_v, rng, cfg.conv_k);
  if (with_cross) {
    p.ln_cross = LayerNormParams::init(cfg.d_model);
    p.cross_attn = AttentionWeights::init(cfg.d_model, cfg.heads, cfg.d_k, cfg.d_v, rng, 1);
  }
  p.ln2 = LayerNormParams::init(cfg.d_model);
  p.ffn = FfnParams::init(cfg.d_model, cfg.d_ff, rng);
  return p;
}

Tensor decoder_block(const Tensor& x, const DecoderBlockParams& p, const SparsityPattern* pattern,
                     const Tensor* enc_out) {
  Tensor normed = layer_norm_rows(x, p.ln1.gain, p.ln1.bias);
  Tensor attn_out = p.attn.is_convolutional()
                        ? conv_self_attention(normed, p.attn, pattern)
                        : multi_head_attention(normed, normed, p.attn, pattern);
  Tensor h = add(x, attn_out);
  if (enc_out != nullptr) {
    if (!p.cross_attn) throw UsageError("decoder_block: encoder output given but no cross weights");
    Tensor cn = layer_norm_rows(h, p.ln_cross->gain, p.ln_cross->bias);
    h = add(h, multi_head_attention(cn, *enc_out, *p.cross_attn, nullptr));
  }
  Tensor n2 = layer_norm_rows(h, p.ln2.gain, p.ln2.bias);
  return add(h, pointwise_ffn(n2, p.ffn));
}

namespace {

void append_named(std::vector<std::pair<std::string, Tensor>>& out, const std::string& name,
                  const Tensor& t) {
  out.emplace_back(name, t);
}

}  // namespace

namespace detail {

std::vector<std::pair<std::string, Tensor>> block_named_params(const std::string& prefix,
                                                               const DecoderBlockParams& p) {
  std::vector<std::pair<std::string, Tensor>> out;
  append_named(out, prefix + ".ln1.gain", p.ln1.gain);
  append_named(out, prefix + ".ln1.bias", p.ln1.bias);
  for (std::size_t h = 0; h < p.attn.heads(); ++h) {
    append_named(out, prefix + ".attn.h" + std::to_string(h) + ".wq", p.attn.w_q[h]);
    append_named(out, prefix + ".attn.h" + std::to_string(h) + ".wk", p.attn.w_k[h]);
    append_named(out, prefix + ".attn.h" + std::to_string(h) + ".wv", p.attn.w_v[h]);
  }
  append_named(out, prefix + ".attn.wo", p.attn.w_o);
  for (std::size_t h = 0; h < p.attn.conv_q.size(); ++h) {
    append_named(out, prefix + ".attn.h" + std::to_string(h) + ".convq", p.attn.conv_q[h]);
    append_named(out, prefix + ".attn.h" + std::to_string(h) + ".convk", p.attn.conv_k[h]);
  }
  if (p.cross_attn) {
    append_named(out, prefix + ".lnx.gain", p.ln_cross->gain);
    append_named(out, prefix + ".lnx.bias", p.ln_cross->bias);
    for (std::size_t h = 0; h < p.cross_attn->heads(); ++h) {
      append_named(out, prefix + ".cross.h" + std::to_string(h) + ".wq", p.cross_attn->w_q[h]);
      append_named(out, prefix + ".cross.h" + std::to_string(h) + ".wk", p.cross_attn->w_k[h]);
      append_named(out, prefix + ".cross.h" + std::to_string(h) + ".wv", p.cross_attn->w_v[h]);
    }
    append_named(out, prefix + ".cross.wo", p.cross_attn->w_o);
  }
  append_named(out, prefix + ".ln2.gain", p.ln2.gain);
  append_named(out, prefix + ".ln2.bias", p.ln2.bias);
  append_named(out, prefix + ".ffn.w1", p.ffn.w1);
  append_named(out, prefix + ".ffn.b1", p.ffn.b1);
  append_named(out, prefix + ".ffn.w2", p.ffn.w2);
  append_named(out, prefix + ".ffn.b2", p.ffn.b2);
  return out;
}

}  // namespace detail

GptModel::GptModel(TransformerConfig cfg, Rng rng) : cfg_(cfg) {
  cfg_.validate();
  if (cfg_.vocab_size == 0) throw ConfigError("gpt model: vocab_size must be set");
  token_table_ = xavier_uniform({cfg_.vocab_size, cfg_.d_model}, cfg_.vocab_size, cfg_.d_model, rng);
  pe_ = sinusoidal_pe(cfg_.max_len, cfg_.d_model);
  for (std::size_t i = 0; i < cfg_.n_layers; ++i) {
    blocks_.push_back(DecoderBlockParams::init(cfg_, rng, false));
  }
  w_out_ = xavier_uniform({cfg_.d_model, cfg_.vocab_size}, cfg_.d_model, cfg_.vocab_size, rng);
}

Tensor GptModel::forward(const std::vector<int>& tokens) const {
  if (tokens.empty()) throw UsageError("gpt_forward: empty token sequence");
  if (tokens.size() > cfg_.max_len) {
    throw UsageError("gpt_forward: sequence length " + std::to_string(tokens.size()) +
                     " exceeds max_len " + std::to_string(cfg_.max_len));
  }
  const std::size_t t = tokens.size();
  Tensor x = add(embedding(tokens, token_table_), slice_rows(pe_, 0, t));
  const SparsityPattern pattern = make_pattern(cfg_.mask_kind, t);
  for (const auto& block : blocks_) x = decoder_block(x, block, &pattern);
  return matmul(x, w_out_);
}

std::vector<Tensor> GptModel::parameters() const {
  std::vector<Tensor> ps{token_table_};
  for (const auto& b : blocks_)
    for (const auto& t : b.parameters()) ps.push_back(t);
  ps.push_back(w_out_);
  return ps;
}

std::vector<std::pair<std::string, Tensor>> GptModel::named_parameters() const {
  std::vector<std::pair<std::string, Tensor>> out;
  append_named(out, "embed.tokens", token_table_);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    auto bp = detail::block_named_params("block" + std::to_string(i), blocks_[i]);
    out.insert(out.end(), bp.begin(), bp.end());
  }
  append_named(out, "head.out", w_out_);
  return out;
}

void GptModel::load_named_parameters(const std::vector<std::pair<std::string, Tensor>>& named) {
  auto mine = named_parameters();
  if (mine.size() != named.size()) {
    throw FormatError("checkpoint: expected " + std::to_string(mine.size()) + " tensors, got " +
                      std::to_string(named.size()));
  }
  for (std::size_t i = 0; i < mine.size(); ++i) {
    if (mine[i].first != named[i].first) {
      throw FormatError("checkpoint: tensor '" + named[i].first + "' where '" + mine[i].first +
                        "' was expected");
    }
    if (mine[i].second.shape() != named[i].second.shape()) {
      throw FormatError("checkpoint: shape mismatch for '" + named[i].first + "'");
    }
    std::copy(named[i].second.values().begin(), named[i].second.values().end(),
              mine[i].second.data());
  }
}

EncoderDecoderModel::EncoderDecoderModel(TransformerConfig cfg, Rng rng) : cfg_(cfg) {
  cfg_.validate();
  if (cfg_.vocab_size == 0 || cfg_.input_dim == 0) {
    throw ConfigError("encoder-decoder: both vocab_size and input_dim must be set");
  }
  w_src_in_ = xavier_uniform({cfg_.input_dim, cfg_.d_model}, cfg_.input_dim, cfg_.d_model, rng);
  for (std::size_t i = 0; i < cfg_.n_layers; ++i)
    enc_blocks_.push_back(DecoderBlockParams::init(cfg_, rng, false));
  token_table_ = xavier_uniform({cfg_.vocab_size, cfg_.d_model}, cfg_.vocab_size, cfg_.d_model, rng);
  pe_ = sinusoidal_pe(cfg_.max_len, cfg_.d_model);
  for (std::size_t i = 0; i < cfg_.n_layers; ++i)
    dec_blocks_.push_back(DecoderBlockParams::init(cfg_, rng, true));
  w_out_ = xavier_uniform({cfg_.d_model, cfg_.vocab_size}, cfg_.d_model, cfg_.vocab_size, rng);
}

Tensor EncoderDecoderModel::forward(const Tensor& src, const std::vector<int>& tgt_tokens) const {
  if (tgt_tokens.empty()) throw UsageError("encoder_decoder_forward: empty target sequence");
  if (src.rank() != 2 || src.shape()[1] != cfg_.input_dim) {
    throw ShapeError("encoder_decoder_forward: source must be (T x input_dim), got " +
                     shape_str(src.shape()));
  }
  if (src.shape()[0] > cfg_.max_len || tgt_tokens.size() > cfg_.max_len) {
    throw UsageError("encoder_decoder_forward: sequence exceeds max_len");
  }
  Tensor enc = add(matmul(src, w_src_in_), slice_rows(pe_, 0, src.shape()[0]));
  for (const auto& block : enc_blocks_) enc = decoder_block(enc, block, nullptr);

  const std::size_t t = tgt_tokens.size();
  Tensor dec = add(embedding(tgt_tokens, token_table_), slice_rows(pe_, 0, t));
  const SparsityPattern pattern = make_pattern(cfg_.mask_kind, t);
  for (const auto& block : dec_blocks_) dec = decoder_block(dec, block, &pattern, &enc);
  return matmul(dec, w_out_);
}

std::vector<Tensor> EncoderDecoderModel::parameters() const {
  std::vector<Tensor> ps{w_src_in_};
  for (const auto& b : enc_blocks_)
    for (const auto& t : b.parameters()) ps.push_back(t);
  ps.push_back(token_table_);
  for (const auto& b : dec_blocks_)
    for (const auto& t : b.parameters()) ps.push_back(t);
  ps.push_back(w_out_);
  return ps;
}

namespace {

// Shift a window by its final value; the residual head adds it back.
std::vector<double> shift_by_last(const std::vector<double>& window) {
  std::vector<double> u(window.size());
  const double last = window.back();
  for (std::size_t i = 0; i < window.size(); ++i) u[i] = window[i] - last;
  return u;
}

}  // namespace

TransformerForecaster::TransformerForecaster(TransformerConfig cfg, Rng rng) : cfg_(cfg) {
  cfg_.input_dim = 1;
  cfg_.vocab_size = 0;
  cfg_.validate();
  w_in_ = xavier_uniform({1, cfg_.d_model}, 1, cfg_.d_model, rng);
  pe_ = sinusoidal_pe(cfg_.max_len, cfg_.d_model);
  for (std::size_t i = 0; i < cfg_.n_layers; ++i)
    blocks_.push_back(DecoderBlockParams::init(cfg_, rng, false));
  w_head_ = xavier_uniform({cfg_.d_model, 1}, cfg_.d_model, 1, rng);
  b_head_ = Tensor::zeros({1}, true);
}

Tensor TransformerForecaster::predict_next(const std::vector<double>& window) const {
  if (window.empty()) throw UsageError("forecaster: empty window");
  if (window.size() > cfg_.max_len) {
    throw UsageError("forecaster: window length " + std::to_string(window.size()) +
                     " exceeds max_len " + std::to_string(cfg_.max_len));
  }
  const std::size_t t = window.size();
  const double last = window.back();
  Tensor u = Tensor::from_data({t, 1}, shift_by_last(window));
  Tensor x = add(matmul(u, w_in_), slice_rows(pe_, 0, t));
  const SparsityPattern pattern = make_pattern(cfg_.mask_kind, t);
  for (const auto& block : blocks_) x = decoder_block(x, block, &pattern);
  Tensor last_row = slice_rows(x, t - 1, t);
  Tensor delta = add(matmul(last_row, w_head_), reshape(b_head_, {1, 1}));
  return add_scalar(reshape(delta, {1}), last);
}

std::vector<Tensor> TransformerForecaster::parameters() const {
  std::vector<Tensor> ps{w_in_};
  for (const auto& b : blocks_)
    for (const auto& t : b.parameters()) ps.push_back(t);
  ps.push_back(w_head_);
  ps.push_back(b_head_);
  return ps;
}

std::vector<std::pair<std::string, Tensor>> TransformerForecaster::named_parameters() const {
  std::vector<std::pair<std::string, Tensor>> out;
  append_named(out, "embed.input", w_in_);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    auto bp = detail::block_named_params("block" + std::to_string(i), blocks_[i]);
    out.insert(out.end(), bp.begin(), bp.end());
  }
  append_named(out, "head.w", w_head_);
  append_named(out, "head.b", b_head_);
  return out;
}

void TransformerForecaster::load_named_parameters(
    const std::vector<std::pair<std::string, Tensor>>& named) {
  auto mine = named_parameters();
  if (mine.size() != named.size()) {
    throw FormatError("checkpoint: expected " + std::to_string(mine.size()) + " tensors, got " +
                      std::to_string(named.size()));
  }
  for (std::size_t i = 0; i < mine.size(); ++i) {
    if (mine[i].first != named[i].first || mine[i].second.shape() != named[i].second.shape()) {
      throw FormatError("checkpoint: tensor '" + named[i].first + "' does not match model");
    }
    std::copy(named[i].second.values().begin(), named[i].second.values().end(),
              mine[i].second.data());
  }
}

EncDecForecaster::EncDecForecaster(TransformerConfig cfg, Rng rng) : cfg_(cfg) {
  cfg_.input_dim = 1;
  cfg_.vocab_size = 0;
  cfg_.validate();
  w_in_ = xavier_uniform({1, cfg_.d_model}, 1, cfg_.d_model, rng);
  pe_ = sinusoidal_pe(cfg_.max_len, cfg_.d_model);
  for (std::size_t i = 0; i < cfg_.n_layers; ++i)
    enc_blocks_.push_back(DecoderBlockParams::init(cfg_, rng, false));
  query_seed_ = xavier_uniform({1, cfg_.d_model}, 1, cfg_.d_model, rng);
  for (std::size_t i = 0; i < cfg_.n_layers; ++i)
    dec_blocks_.push_back(DecoderBlockParams::init(cfg_, rng, true));
  w_head_ = xavier_uniform({cfg_.d_model, 1}, cfg_.d_model, 1, rng);
  b_head_ = Tensor::zeros({1}, true);
}

Tensor EncDecForecaster::predict_next(const std::vector<double>& window) const {
  if (window.empty()) throw UsageError("forecaster: empty window");
  if (window.size() > cfg_.max_len) throw UsageError("forecaster: window exceeds max_len");
  const std::size_t t = window.size();
  const double last = window.back();
  Tensor u = Tensor::from_data({t, 1}, shift_by_last(window));
  Tensor enc = add(matmul(u, w_in_), slice_rows(pe_, 0, t));
  for (const auto& block : enc_blocks_) enc = decoder_block(enc, block, nullptr);

  Tensor dec = query_seed_;
  const SparsityPattern pattern = full_causal_pattern(1);
  for (const auto& block : dec_blocks_) dec = decoder_block(dec, block, &pattern, &enc);
  Tensor delta = add(matmul(dec, w_head_), reshape(b_head_, {1, 1}));
  return add_scalar(reshape(delta, {1}), last);
}

std::vector<Tensor> EncDecForecaster::parameters() const {
  std::vector<Tensor> ps{w_in_};
  for (const auto& b : enc_blocks_)
    for (const auto& t : b.parameters()) ps.push_back(t);
  ps.push_back(query_seed_);
  for (const auto& b : dec_blocks_)
    for (const auto& t : b.parameters()) ps.push_back(t);
  ps.push_back(w_head_);
  ps.push_back(b_head_);
  return ps;
}

std::vector<std::pair<std::string, Tensor>> EncDecForecaster::named_parameters() const {
  std::vector<std::pair<std::string, Tensor>> out;
  append_named(out, "embed.input", w_in_);
  for (std::size_t i = 0; i < enc_blocks_.size(); ++i) {
    auto bp = detail::block_named_params("enc" + std::to_string(i), enc_blocks_[i]);
    out.insert(out.end(), bp.begin(), bp.end());
  }
  append_named(out, "dec.query", query_seed_);
  for (std::size_t i = 0; i < dec_blocks_.size(); ++i) {
    auto bp = detail::block_named_params("dec" + std::to_string(i), dec_blocks_[i]);
    out.insert(out.end(), bp.begin(), bp.end());
  }
  append_named(out, "head.w", w_head_);
  append_named(out, "head.b", b_head_);
  return out;
}

void EncDecForecaster::load_named_parameters(
    const std::vector<std::pair<std::string, Tensor>>& named) {
  auto mine = named_parameters();
  if (mine.size() != named.size()) {
    throw FormatError("checkpoint: expected " + std::to_string(mine.size()) + " tensors, got " +
                      std::to_string(named.size()));
  }
  for (std::size_t i = 0; i < mine.size(); ++i) {
    if (mine[i].first != named[i].first || mine[i].second.shape() != named[i].second.shape()) {
      throw FormatError("checkpoint: tensor '" + named[i].first + "' does not match model");
    }
    std::copy(named[i].second.values().begin(), named[i].second.values().end(),
              mine[i].second.data());
  }
}

}  // namespace cfwb
