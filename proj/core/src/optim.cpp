// Copyright (c) 2026 The cfwb Authors
// SPDX-License-Identifier: Apache-2.0

#include "cfwb/optim.hpp"

#include <cmath>

namespace cfwb {

void adam_step(std::vector<Tensor>& params, AdamState& state, const AdamConfig& cfg) {
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(params[i].size(), 0.0);
      state.v[i].assign(params[i].size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) {
    throw ShapeError("adam_step: state tracks " + std::to_string(state.m.size()) +
                     " tensors, got " + std::to_string(params.size()));
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    if (state.m[i].size() != p.size()) {
      throw ShapeError("adam_step: moment size " + std::to_string(state.m[i].size()) +
                       " does not match parameter size " + std::to_string(p.size()));
    }
    const std::vector<double>& g = p.grad();
    double* data = p.data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      state.m[i][j] = cfg.beta1 * state.m[i][j] + (1.0 - cfg.beta1) * g[j];
      state.v[i][j] = cfg.beta2 * state.v[i][j] + (1.0 - cfg.beta2) * g[j] * g[j];
      const double mhat = state.m[i][j] / bc1;
      const double vhat = state.v[i][j] / bc2;
      data[j] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

void zero_grads(std::vector<Tensor>& params) {
  for (Tensor& p : params) p.zero_grad();
}

}  // namespace cfwb
