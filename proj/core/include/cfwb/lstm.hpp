// Copyright (c) 2026 The cfwb Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <utility>
#include <vector>

#include "cfwb/ops.hpp"
#include "cfwb/rng.hpp"
#include "cfwb/tensor.hpp"

namespace cfwb {

// Standard LSTM cell weights. Gate blocks are stacked in the fixed order
// (input, forget, cell, output); the forget-gate bias starts at 1.0.
struct LstmWeights {
  Tensor w_x;  // (4H x D)
  Tensor w_h;  // (4H x H)
  Tensor b;    // (4H)
  std::size_t hidden = 0;

  std::vector<Tensor> parameters() const { return {w_x, w_h, b}; }
  static LstmWeights init(std::size_t input_dim, std::size_t hidden, Rng& rng);
};

struct LstmState {
  Tensor h;  // (1 x H)
  Tensor c;  // (1 x H)
};

// i,f,o = sigmoid(...), g = tanh(...); c' = f*c + i*g; h' = o*tanh(c').
LstmState lstm_cell(const Tensor& x_t, const LstmState& state, const LstmWeights& w);

// Unrolls the cell over a real-valued window (one feature per step) and maps
// the final hidden state through a linear head. Uses the same shift-by-last
// residual parameterization as the transformer forecaster.
class LstmForecaster {
 public:
  LstmForecaster(std::size_t hidden, Rng rng);

  Tensor predict_next(const std::vector<double>& window) const;

  std::size_t hidden() const { return w_.hidden; }
  std::vector<Tensor> parameters() const;
  std::vector<std::pair<std::string, Tensor>> named_parameters() const;
  void load_named_parameters(const std::vector<std::pair<std::string, Tensor>>& named);

 private:
  LstmWeights w_;
  Tensor w_head_;  // (H x 1)
  Tensor b_head_;  // (1)
};

}  // namespace cfwb
