// Copyright (c) 2026 The cfwb Authors
// SPDX-License-Identifier: Apache-2.0

#include "cfwb/vq.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace cfwb {

void Codebook::validate() const {
  if (k < 2) throw ConfigError("codebook: need at least 2 entries");
  if (dim < 1) throw ConfigError("codebook: dimension must be >= 1");
  if (entries.size() != k * dim) throw ShapeError("codebook: entry table has wrong size");
  for (double v : entries) {
    if (!std::isfinite(v)) throw NumericError("codebook: non-finite entry");
  }
}

Codebook codebook_from_samples(const std::vector<std::vector<double>>& samples, std::size_t k,
                               Rng& rng) {
  if (k < 2) throw ConfigError("codebook: need at least 2 entries");
  if (samples.empty()) throw UsageError("codebook: no samples");
  const std::size_t dim = samples[0].size();
  std::set<std::vector<double>> distinct;
  std::vector<const std::vector<double>*> pool;
  // Shuffled pass over the samples, keeping the first occurrence of each
  // distinct vector, so initialization has no duplicate codes.
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1],
              order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
  }
  for (std::size_t idx : order) {
    if (samples[idx].size() != dim) throw ShapeError("codebook: inconsistent sample dimensions");
    if (distinct.insert(samples[idx]).second) pool.push_back(&samples[idx]);
    if (pool.size() == k) break;
  }
  Codebook cb;
  cb.k = k;
  cb.dim = dim;
  cb.entries.reserve(k * dim);
  for (const auto* v : pool) cb.entries.insert(cb.entries.end(), v->begin(), v->end());
  // Fewer distinct samples than codes: pad with jittered copies so entries
  // stay distinct and data vectors still match their exact code at distance 0.
  while (cb.entries.size() < k * dim) {
    const std::size_t base = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1));
    std::vector<double> jittered(*pool[base]);
    for (double& v : jittered) v += 1e-3 * rng.normal();
    if (!distinct.insert(jittered).second) continue;
    cb.entries.insert(cb.entries.end(), jittered.begin(), jittered.end());
  }
  cb.usage_counts.assign(k, 0);
  return cb;
}

std::size_t vq_encode_one(const std::vector<double>& v, const Codebook& cb) {
  if (v.size() != cb.dim) {
    throw ShapeError("vq_encode: vector dimension " + std::to_string(v.size()) +
                     " does not match codebook dimension " + std::to_string(cb.dim));
  }
  std::size_t best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < cb.k; ++i) {
    const double* e = cb.entry(i);
    double dist = 0.0;
    for (std::size_t j = 0; j < cb.dim; ++j) {
      const double d = v[j] - e[j];
      dist += d * d;
    }
    if (dist < best_dist) {  // strict: ties keep the lowest index
      best_dist = dist;
      best = i;
    }
  }
  return best;
}

std::vector<std::size_t> vq_encode(const std::vector<std::vector<double>>& vecs, Codebook& cb) {
  std::vector<std::size_t> out(vecs.size());
  for (std::size_t i = 0; i < vecs.size(); ++i) {
    out[i] = vq_encode_one(vecs[i], cb);
    cb.usage_counts[out[i]] += 1;
  }
  return out;
}

std::vector<std::vector<double>> vq_decode(const std::vector<std::size_t>& indices,
                                           const Codebook& cb) {
  std::vector<std::vector<double>> out;
  out.reserve(indices.size());
  for (std::size_t idx : indices) {
    if (idx >= cb.k) {
      throw DataError("vq_decode: index " + std::to_string(idx) + " out of range [0, " +
                      std::to_string(cb.k) + ")");
    }
    out.emplace_back(cb.entry(idx), cb.entry(idx) + cb.dim);
  }
  return out;
}

VqLosses vq_train_step(const std::vector<std::vector<double>>& batch, Codebook& cb, double beta,
                       double update_rate) {
  if (batch.empty()) throw UsageError("vq_train_step: empty batch");
  VqLosses losses;
  std::vector<double> assigned_sum(cb.k * cb.dim, 0.0);
  std::vector<std::size_t> assigned_count(cb.k, 0);
  for (const auto& x : batch) {
    const std::size_t idx = vq_encode_one(x, cb);
    cb.usage_counts[idx] += 1;
    const double* e = cb.entry(idx);
    double dist = 0.0;
    for (std::size_t j = 0; j < cb.dim; ++j) {
      const double d = x[j] - e[j];
      dist += d * d;
      assigned_sum[idx * cb.dim + j] += x[j];
    }
    assigned_count[idx] += 1;
    losses.reconstruction += dist;
  }
  losses.reconstruction /= static_cast<double>(batch.size());
  // With the identity encoder the stop-gradient splits share one value.
  losses.codebook = losses.reconstruction;
  losses.commitment = beta * losses.reconstruction;

  for (std::size_t i = 0; i < cb.k; ++i) {
    if (assigned_count[i] == 0) continue;
    for (std::size_t j = 0; j < cb.dim; ++j) {
      const double mean = assigned_sum[i * cb.dim + j] / static_cast<double>(assigned_count[i]);
      double& e = cb.entries[i * cb.dim + j];
      e += update_rate * (mean - e);
    }
  }
  return losses;
}

Tensor quantize_st(const Tensor& x, const Codebook& cb) {
  if (x.rank() != 2 || x.shape()[1] != cb.dim) {
    throw ShapeError("quantize_st: input must be (B x " + std::to_string(cb.dim) + "), got " +
                     shape_str(x.shape()));
  }
  const std::size_t b = x.shape()[0];
  std::vector<double> q(b * cb.dim);
  for (std::size_t i = 0; i < b; ++i) {
    std::vector<double> row(x.data() + i * cb.dim, x.data() + (i + 1) * cb.dim);
    const std::size_t idx = vq_encode_one(row, cb);
    std::copy_n(cb.entry(idx), cb.dim, q.data() + i * cb.dim);
  }
  Tensor out = Tensor::from_data(x.shape(), std::move(q));
  if (Tape* tp = Tape::current()) {
    auto xd = x.ptr();
    auto od = out.ptr();
    // Straight-through estimator: d(quantize)/dx treated as identity.
    tp->record(od, [xd, od] {
      if (od->grad.empty() || !xd->wants_grad()) return;
      xd->ensure_grad();
      for (std::size_t i = 0; i < od->grad.size(); ++i) xd->grad[i] += od->grad[i];
    });
  }
  return out;
}

std::vector<int> tokenize_clip(const VideoClip& clip, std::size_t p, Codebook& cb) {
  std::vector<int> tokens;
  tokens.reserve(clip.t * (clip.h / p) * (clip.w / p));
  for (std::size_t f = 0; f < clip.t; ++f) {
    const auto patches = patchify(clip.frame_data(f), clip.h, clip.w, p);
    for (const auto& patch : patches) {
      const std::size_t idx = vq_encode_one(patch, cb);
      cb.usage_counts[idx] += 1;
      tokens.push_back(static_cast<int>(idx));
    }
  }
  return tokens;
}

VideoClip detokenize_tokens(const std::vector<int>& tokens, std::size_t t, std::size_t h,
                            std::size_t w, std::size_t p, const Codebook& cb) {
  const std::size_t per_frame = (h / p) * (w / p);
  if (tokens.size() != t * per_frame) {
    throw ShapeError("detokenize: expected " + std::to_string(t * per_frame) + " tokens, got " +
                     std::to_string(tokens.size()));
  }
  VideoClip clip;
  clip.t = t;
  clip.h = h;
  clip.w = w;
  clip.pixels.assign(t * h * w, 0);
  for (std::size_t f = 0; f < t; ++f) {
    std::vector<std::size_t> indices(per_frame);
    for (std::size_t i = 0; i < per_frame; ++i) {
      const int tok = tokens[f * per_frame + i];
      if (tok < 0) throw DataError("detokenize: negative token");
      indices[i] = static_cast<std::size_t>(tok);
    }
    const auto patches = vq_decode(indices, cb);
    unpatchify(patches, h, w, p, clip.pixels.data() + f * h * w);
  }
  return clip;
}

int sample_token(const Tensor& logits_row, double temperature, Rng& rng) {
  if (logits_row.rank() != 1 && !(logits_row.rank() == 2 && logits_row.shape()[0] == 1)) {
    throw ShapeError("sample_token: logits must be a single row");
  }
  const std::size_t v = logits_row.size();
  const double* l = logits_row.data();
  if (temperature < 0.0) throw UsageError("sample_token: temperature must be >= 0");
  if (temperature == 0.0) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v; ++i) {
      if (l[i] > l[best]) best = i;  // ties keep the lowest index
    }
    return static_cast<int>(best);
  }
  double mx = l[0];
  for (std::size_t i = 1; i < v; ++i) mx = std::max(mx, l[i]);
  std::vector<double> probs(v);
  double sum = 0.0;
  for (std::size_t i = 0; i < v; ++i) {
    probs[i] = std::exp((l[i] - mx) / temperature);
    sum += probs[i];
  }
  const double draw = rng.uniform() * sum;
  double acc = 0.0;
  for (std::size_t i = 0; i < v; ++i) {
    acc += probs[i];
    if (draw < acc) return static_cast<int>(i);
  }
  return static_cast<int>(v - 1);
}

VideoClip conditional_generate(const FramePrior& prior, const VideoClip& context,
                               std::size_t n_condition, std::size_t n_generate, double temperature,
                               std::uint64_t seed) {
  if (n_condition < 1 || n_generate < 1) {
    throw UsageError("conditional_generate: need N >= 1 condition and M >= 1 generated frames");
  }
  if (context.t < n_condition) {
    throw UsageError("conditional_generate: context has " + std::to_string(context.t) +
                     " frames, need " + std::to_string(n_condition));
  }
  if (context.h != prior.frame_h || context.w != prior.frame_w) {
    throw ShapeError("conditional_generate: context frame size does not match the prior");
  }
  const std::size_t tpf = prior.tokens_per_frame();
  const std::size_t total_tokens = (n_condition + n_generate) * tpf;
  if (total_tokens > prior.gpt.config().max_len) {
    throw UsageError("conditional_generate: " + std::to_string(total_tokens) +
                     " tokens exceed the model max_len " +
                     std::to_string(prior.gpt.config().max_len));
  }

  // Prompt: tokens of the conditioning frames.
  Codebook cb = prior.codebook;  // local copy so usage diagnostics stay per-call
  VideoClip prompt_clip;
  prompt_clip.t = n_condition;
  prompt_clip.h = context.h;
  prompt_clip.w = context.w;
  prompt_clip.pixels.assign(context.pixels.begin(),
                            context.pixels.begin() + n_condition * context.h * context.w);
  std::vector<int> tokens = tokenize_clip(prompt_clip, prior.patch, cb);

  Rng rng = Rng(seed).substream("sampling");
  NoTape inference;
  for (std::size_t i = 0; i < n_generate * tpf; ++i) {
    Tensor logits = prior.gpt.forward(tokens);
    Tensor last = slice_rows(logits, tokens.size() - 1, tokens.size());
    tokens.push_back(sample_token(last, temperature, rng));
  }

  // Decode only the generated region; conditioning frames are copied verbatim.
  std::vector<int> generated(tokens.begin() + n_condition * tpf, tokens.end());
  VideoClip tail =
      detokenize_tokens(generated, n_generate, context.h, context.w, prior.patch, cb);

  VideoClip out;
  out.t = n_condition + n_generate;
  out.h = context.h;
  out.w = context.w;
  out.sprite_size = context.sprite_size;
  out.pixels.resize(out.t * out.h * out.w);
  std::copy_n(context.pixels.begin(), n_condition * out.h * out.w, out.pixels.begin());
  std::copy(tail.pixels.begin(), tail.pixels.end(),
            out.pixels.begin() + n_condition * out.h * out.w);
  return out;
}

}  // namespace cfwb
