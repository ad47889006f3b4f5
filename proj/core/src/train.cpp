// Copyright (c) 2026 The cfwb Authors
// SPDX-License-Identifier: Apache-2.0

#include "cfwb/train.hpp"

#include <cmath>

namespace cfwb {

TrainResult train_loop(std::vector<Tensor>& params,
                       const std::function<Tensor(std::size_t step, Rng& rng)>& loss_fn,
                       std::size_t steps, const AdamConfig& adam, Rng rng) {
  if (steps < 1) throw UsageError("train: steps must be >= 1");
  if (params.empty()) throw UsageError("train: no parameters");
  TrainResult result;
  result.loss_trace.reserve(steps);
  AdamState state;
  for (std::size_t step = 0; step < steps; ++step) {
    double loss_value;
    {
      Tape tape;
      Tensor loss = loss_fn(step, rng);
      loss_value = loss.item();
      if (!std::isfinite(loss_value)) {
        throw NumericError("training diverged: loss is not finite at step " +
                           std::to_string(step));
      }
      tape.backward(loss);
    }
    adam_step(params, state, adam);
    zero_grads(params);
    result.loss_trace.push_back(loss_value);
  }
  return result;
}

}  // namespace cfwb
