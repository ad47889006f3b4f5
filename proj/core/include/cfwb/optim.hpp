// Copyright (c) 2026 The cfwb Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "cfwb/tensor.hpp"

namespace cfwb {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moment state, one slot per parameter tensor.
struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  long step = 0;
};

// One bias-corrected Adam update over `params` using their accumulated grads.
// Parameter order must stay stable across steps.
void adam_step(std::vector<Tensor>& params, AdamState& state, const AdamConfig& cfg);

void zero_grads(std::vector<Tensor>& params);

}  // namespace cfwb
