// Copyright (c) 2026 The cfwb Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <vector>

#include "cfwb/ops.hpp"
#include "cfwb/patterns.hpp"
#include "cfwb/rng.hpp"
#include "cfwb/tensor.hpp"

namespace cfwb {

// Per-head projection matrices plus the output projection. Conv kernels are
// present iff the weights drive convolutional self-attention (conv_width > 1
// replaces the Q/K linear maps by causal convolutions over the input).
struct AttentionWeights {
  std::vector<Tensor> w_q;  // h tensors, each (d_model x d_k)
  std::vector<Tensor> w_k;  // h tensors, each (d_model x d_k)
  std::vector<Tensor> w_v;  // h tensors, each (d_model x d_v)
  Tensor w_o;               // (h*d_v x d_model)
  std::vector<Tensor> conv_q;  // h tensors, each (k x d_model x d_k); empty unless conv
  std::vector<Tensor> conv_k;

  std::size_t heads() const { return w_q.size(); }
  std::size_t d_model() const { return w_q.at(0).shape()[0]; }
  std::size_t key_dim() const { return w_q.at(0).shape()[1]; }
  std::size_t value_dim() const { return w_v.at(0).shape()[1]; }
  std::size_t conv_width() const { return conv_q.empty() ? 1 : conv_q[0].shape()[0]; }
  bool is_convolutional() const { return !conv_q.empty(); }

  std::vector<Tensor> parameters() const;

  // Random init; conv_width > 1 also allocates causal conv kernels.
  static AttentionWeights init(std::size_t d_model, std::size_t heads, std::size_t d_k,
                               std::size_t d_v, Rng& rng, std::size_t conv_width = 1);
};

// Row softmax restricted to the pattern's allowed key set; nullptr means all
// keys are allowed. Disallowed positions get probability exactly zero (the
// masked scores never enter the stabilized exponentials).
Tensor masked_softmax_rows(const Tensor& scores, const SparsityPattern* pattern);

// softmax(Q K^T / sqrt(d_k)) V with optional causal sparsity pattern.
Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            const SparsityPattern* pattern = nullptr);

struct AttentionTrace {
  Tensor output;
  Tensor probs;  // (T_q x T_k) row-stochastic over the allowed set
};
AttentionTrace scaled_dot_attention_traced(const Tensor& q, const Tensor& k, const Tensor& v,
                                           const SparsityPattern* pattern = nullptr);

// h parallel projected attention heads, concatenated and re-projected.
// Self-attention when x_q and x_kv alias, cross-attention otherwise.
Tensor multi_head_attention(const Tensor& x_q, const Tensor& x_kv, const AttentionWeights& w,
                            const SparsityPattern* pattern = nullptr);

// Queries and keys from causal convolutions of width k over x so scores see
// local context shape; values stay pointwise. k = 1 reproduces
// multi_head_attention exactly.
Tensor conv_self_attention(const Tensor& x, const AttentionWeights& w,
                           const SparsityPattern* pattern = nullptr);

// Factorized 2-D attention on an (H x W x d_model) grid: one full attention
// pass within every row, then one within every column of the result.
Tensor axial_attention(const Tensor& x, const AttentionWeights& w_row,
                       const AttentionWeights& w_col);

}  // namespace cfwb
