// Copyright (c) 2026 The cfwb Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "cfwb/frames.hpp"
#include "cfwb/model.hpp"
#include "cfwb/tensor.hpp"

namespace cfwb {

// K x D table of latent code vectors.
struct Codebook {
  std::size_t k = 0;
  std::size_t dim = 0;
  std::vector<double> entries;             // k * dim, row-major
  std::vector<std::size_t> usage_counts;   // k, encode-side diagnostics

  const double* entry(std::size_t i) const { return entries.data() + i * dim; }
  void validate() const;
};

// Initialization from K distinct training vectors; throws DataError when the
// sample pool holds fewer distinct vectors than K.
Codebook codebook_from_samples(const std::vector<std::vector<double>>& samples, std::size_t k,
                               Rng& rng);

// Nearest entry by squared L2; ties break to the lowest index.
std::size_t vq_encode_one(const std::vector<double>& v, const Codebook& cb);
// Batch encode; bumps usage_counts.
std::vector<std::size_t> vq_encode(const std::vector<std::vector<double>>& vecs, Codebook& cb);
std::vector<std::vector<double>> vq_decode(const std::vector<std::size_t>& indices,
                                           const Codebook& cb);

struct VqLosses {
  double reconstruction = 0.0;  // |x - decode(encode(x))|^2 mean
  double codebook = 0.0;        // |sg(x) - e|^2 mean
  double commitment = 0.0;      // beta * |x - sg(e)|^2 mean
};

// One training step: reports the three losses and moves each used entry
// toward the mean of its assigned vectors by `update_rate`.
VqLosses vq_train_step(const std::vector<std::vector<double>>& batch, Codebook& cb,
                       double beta = 0.25, double update_rate = 0.5);

// Straight-through quantization of a (B x D) tensor: forward snaps each row
// to its nearest codebook entry, backward copies gradients through unchanged.
Tensor quantize_st(const Tensor& x, const Codebook& cb);

// Frame-major, raster-within-frame token sequence; length T*(H/p)*(W/p).
std::vector<int> tokenize_clip(const VideoClip& clip, std::size_t p, Codebook& cb);
// Inverse (up to quantization): tokens back to pixels.
VideoClip detokenize_tokens(const std::vector<int>& tokens, std::size_t t, std::size_t h,
                            std::size_t w, std::size_t p, const Codebook& cb);

// Discrete latent prior over tokenized clips.
struct FramePrior {
  GptModel gpt;
  Codebook codebook;
  std::size_t patch = 4;
  std::size_t frame_h = 16;
  std::size_t frame_w = 16;

  std::size_t tokens_per_frame() const { return (frame_h / patch) * (frame_w / patch); }
};

// Copies the first n_condition frames verbatim, then samples
// n_generate*(H/p)*(W/p) tokens autoregressively (temperature 0 = argmax,
// lowest index on ties) and decodes them through the codebook.
VideoClip conditional_generate(const FramePrior& prior, const VideoClip& context,
                               std::size_t n_condition, std::size_t n_generate, double temperature,
                               std::uint64_t seed);

// Sample one token id from a logits row (temperature 0 = argmax).
int sample_token(const Tensor& logits_row, double temperature, Rng& rng);

}  // namespace cfwb
