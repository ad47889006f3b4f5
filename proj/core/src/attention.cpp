// Copyright (c) 2026 The cfwb Authors
// SPDX-License-Identifier: Apache-2.0

#include "cfwb/attention.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cfwb {

std::vector<Tensor> AttentionWeights::parameters() const {
  std::vector<Tensor> ps;
  for (const auto& t : w_q) ps.push_back(t);
  for (const auto& t : w_k) ps.push_back(t);
  for (const auto& t : w_v) ps.push_back(t);
  ps.push_back(w_o);
  for (const auto& t : conv_q) ps.push_back(t);
  for (const auto& t : conv_k) ps.push_back(t);
  return ps;
}

AttentionWeights AttentionWeights::init(std::size_t d_model, std::size_t heads, std::size_t d_k,
                                        std::size_t d_v, Rng& rng, std::size_t conv_width) {
  if (heads < 1 || d_k < 1 || d_v < 1) {
    throw ConfigError("attention weights: heads, d_k, d_v must all be >= 1");
  }
  if (conv_width < 1) throw ConfigError("attention weights: conv width must be >= 1");
  AttentionWeights w;
  for (std::size_t h = 0; h < heads; ++h) {
    w.w_q.push_back(xavier_uniform({d_model, d_k}, d_model, d_k, rng));
    w.w_k.push_back(xavier_uniform({d_model, d_k}, d_model, d_k, rng));
    w.w_v.push_back(xavier_uniform({d_model, d_v}, d_model, d_v, rng));
  }
  w.w_o = xavier_uniform({heads * d_v, d_model}, heads * d_v, d_model, rng);
  if (conv_width > 1) {
    for (std::size_t h = 0; h < heads; ++h) {
      w.conv_q.push_back(
          xavier_uniform({conv_width, d_model, d_k}, conv_width * d_model, d_k, rng));
      w.conv_k.push_back(
          xavier_uniform({conv_width, d_model, d_k}, conv_width * d_model, d_k, rng));
    }
  }
  return w;
}

Tensor masked_softmax_rows(const Tensor& scores, const SparsityPattern* pattern) {
  if (scores.rank() != 2) throw ShapeError("masked_softmax: scores must be 2-D");
  const std::size_t tq = scores.shape()[0], tk = scores.shape()[1];
  if (pattern != nullptr) {
    if (pattern->n != tq || pattern->n != tk) {
      throw ShapeError("masked_softmax: pattern n=" + std::to_string(pattern->n) +
                       " does not match scores " + shape_str(scores.shape()));
    }
  }
  std::vector<double> probs(tq * tk, 0.0);
  for (std::size_t t = 0; t < tq; ++t) {
    const double* row = scores.data() + t * tk;
    double* prow = probs.data() + t * tk;
    if (pattern == nullptr) {
      double mx = row[0];
      for (std::size_t j = 1; j < tk; ++j) mx = std::max(mx, row[j]);
      double sum = 0.0;
      for (std::size_t j = 0; j < tk; ++j) {
        prow[j] = std::exp(row[j] - mx);
        sum += prow[j];
      }
      for (std::size_t j = 0; j < tk; ++j) prow[j] /= sum;
    } else {
      const auto& allowed = pattern->rows[t];
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j : allowed) mx = std::max(mx, row[j]);
      double sum = 0.0;
      for (std::size_t j : allowed) {
        prow[j] = std::exp(row[j] - mx);
        sum += prow[j];
      }
      for (std::size_t j : allowed) prow[j] /= sum;
    }
  }
  Tensor out = Tensor::from_data(scores.shape(), std::move(probs));
  detail::maybe_check_finite(out, "masked_softmax");
  if (Tape* tp = Tape::current()) {
    auto sd = scores.ptr();
    auto od = out.ptr();
    tp->record(od, [sd, od, tq, tk] {
      if (od->grad.empty() || !sd->wants_grad()) return;
      sd->ensure_grad();
      // Masked entries have p = 0, so the softmax Jacobian formula covers both
      // cases at once.
      for (std::size_t t = 0; t < tq; ++t) {
        const double* p = od->data.data() + t * tk;
        const double* g = od->grad.data() + t * tk;
        double dot = 0.0;
        for (std::size_t j = 0; j < tk; ++j) dot += p[j] * g[j];
        double* ds = sd->grad.data() + t * tk;
        for (std::size_t j = 0; j < tk; ++j) ds[j] += p[j] * (g[j] - dot);
      }
    });
  }
  return out;
}

namespace {

Tensor attention_core(const Tensor& q, const Tensor& k, const Tensor& v,
                      const SparsityPattern* pattern, Tensor* probs_out) {
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2) {
    throw ShapeError("attention: Q, K, V must be 2-D");
  }
  if (q.shape()[1] != k.shape()[1]) {
    throw ShapeError("attention: query dim " + shape_str(q.shape()) + " vs key dim " +
                     shape_str(k.shape()));
  }
  if (k.shape()[0] != v.shape()[0]) {
    throw ShapeError("attention: key count " + shape_str(k.shape()) + " vs value count " +
                     shape_str(v.shape()));
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.shape()[1]));
  Tensor scores = mul_scalar(matmul(q, transpose(k)), scale);
  Tensor probs = masked_softmax_rows(scores, pattern);
  if (probs_out != nullptr) *probs_out = probs;
  return matmul(probs, v);
}

}  // namespace

Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            const SparsityPattern* pattern) {
  return attention_core(q, k, v, pattern, nullptr);
}

AttentionTrace scaled_dot_attention_traced(const Tensor& q, const Tensor& k, const Tensor& v,
                                           const SparsityPattern* pattern) {
  AttentionTrace trace;
  trace.output = attention_core(q, k, v, pattern, &trace.probs);
  return trace;
}

Tensor multi_head_attention(const Tensor& x_q, const Tensor& x_kv, const AttentionWeights& w,
                            const SparsityPattern* pattern) {
  if (x_q.rank() != 2 || x_kv.rank() != 2) throw ShapeError("multi_head_attention: inputs must be 2-D");
  if (x_q.shape()[1] != w.d_model() || x_kv.shape()[1] != w.d_model()) {
    throw ShapeError("multi_head_attention: d_model mismatch, inputs " + shape_str(x_q.shape()) +
                     "/" + shape_str(x_kv.shape()) + " vs weights d_model " +
                     std::to_string(w.d_model()));
  }
  std::vector<Tensor> heads;
  heads.reserve(w.heads());
  for (std::size_t h = 0; h < w.heads(); ++h) {
    Tensor q = matmul(x_q, w.w_q[h]);
    Tensor k = matmul(x_kv, w.w_k[h]);
    Tensor v = matmul(x_kv, w.w_v[h]);
    heads.push_back(scaled_dot_attention(q, k, v, pattern));
  }
  return matmul(concat_cols(heads), w.w_o);
}

Tensor conv_self_attention(const Tensor& x, const AttentionWeights& w,
                           const SparsityPattern* pattern) {
  if (!w.is_convolutional() && w.conv_width() == 1) {
    // Width-1 convolution is pointwise; fall back to the linear projections.
    return multi_head_attention(x, x, w, pattern);
  }
  if (x.rank() != 2) throw ShapeError("conv_self_attention: input must be 2-D");
  const std::size_t conv_width = w.conv_width();
  if (conv_width > x.shape()[0]) {
    throw ConfigError("conv_self_attention: conv width " + std::to_string(conv_width) +
                      " exceeds sequence length " + std::to_string(x.shape()[0]));
  }
  std::vector<Tensor> heads;
  heads.reserve(w.heads());
  for (std::size_t h = 0; h < w.heads(); ++h) {
    Tensor q = causal_conv1d(x, w.conv_q[h]);
    Tensor k = causal_conv1d(x, w.conv_k[h]);
    Tensor v = matmul(x, w.w_v[h]);
    heads.push_back(scaled_dot_attention(q, k, v, pattern));
  }
  return matmul(concat_cols(heads), w.w_o);
}

Tensor axial_attention(const Tensor& x, const AttentionWeights& w_row,
                       const AttentionWeights& w_col) {
  if (x.rank() != 3) {
    throw ShapeError("axial_attention: input must be (H x W x d_model), got " +
                     shape_str(x.shape()));
  }
  const std::size_t grid_h = x.shape()[0], grid_w = x.shape()[1], d = x.shape()[2];
  if (w_row.d_model() != d || w_col.d_model() != d) {
    throw ShapeError("axial_attention: weight d_model does not match input depth " +
                     std::to_string(d));
  }
  Tensor flat = reshape(x, {grid_h * grid_w, d});

  // Pass 1: attention within each row of the grid.
  std::vector<Tensor> row_outs;
  row_outs.reserve(grid_h);
  for (std::size_t r = 0; r < grid_h; ++r) {
    Tensor slab = slice_rows(flat, r * grid_w, (r + 1) * grid_w);
    row_outs.push_back(multi_head_attention(slab, slab, w_row, nullptr));
  }
  Tensor pass1 = concat_rows(row_outs);

  // Pass 2: attention within each column of the pass-1 result.
  std::vector<Tensor> col_outs;
  col_outs.reserve(grid_w);
  for (std::size_t c = 0; c < grid_w; ++c) {
    std::vector<std::size_t> idx(grid_h);
    for (std::size_t r = 0; r < grid_h; ++r) idx[r] = r * grid_w + c;
    Tensor slab = gather_rows(pass1, idx);
    col_outs.push_back(multi_head_attention(slab, slab, w_col, nullptr));
  }
  Tensor by_cols = concat_rows(col_outs);  // row (c*H + r) holds grid cell (r, c)

  std::vector<std::size_t> perm(grid_h * grid_w);
  for (std::size_t r = 0; r < grid_h; ++r)
    for (std::size_t c = 0; c < grid_w; ++c) perm[r * grid_w + c] = c * grid_h + r;
  return reshape(gather_rows(by_cols, perm), {grid_h, grid_w, d});
}

}  // namespace cfwb
