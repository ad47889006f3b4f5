// Copyright (c) 2026 The cfwb Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <vector>

#include "cfwb/optim.hpp"
#include "cfwb/rng.hpp"
#include "cfwb/tensor.hpp"

namespace cfwb {

struct TrainResult {
  std::vector<double> loss_trace;  // one entry per step
};

// Generic single-threaded training loop: per step a fresh tape, one scalar
// loss from `loss_fn`, backward, Adam update, zero grads. Aborts with a
// NumericError naming the step if the loss stops being finite. Bit-exact
// reproducible given (params init, rng, steps).
TrainResult train_loop(std::vector<Tensor>& params,
                       const std::function<Tensor(std::size_t step, Rng& rng)>& loss_fn,
                       std::size_t steps, const AdamConfig& adam, Rng rng);

}  // namespace cfwb
