// Copyright (c) 2026 The cfwb Authors
// SPDX-License-Identifier: Apache-2.0

#include "cfwb/lstm.hpp"

namespace cfwb {

LstmWeights LstmWeights::init(std::size_t input_dim, std::size_t hidden, Rng& rng) {
  if (input_dim == 0 || hidden == 0) throw ConfigError("lstm: input_dim and hidden must be >= 1");
  LstmWeights w;
  w.hidden = hidden;
  w.w_x = xavier_uniform({4 * hidden, input_dim}, input_dim, hidden, rng);
  w.w_h = xavier_uniform({4 * hidden, hidden}, hidden, hidden, rng);
  std::vector<double> bias(4 * hidden, 0.0);
  for (std::size_t i = hidden; i < 2 * hidden; ++i) bias[i] = 1.0;  // forget gate
  w.b = Tensor::from_data({4 * hidden}, std::move(bias), true);
  return w;
}

LstmState lstm_cell(const Tensor& x_t, const LstmState& state, const LstmWeights& w) {
  const std::size_t H = w.hidden;
  if (x_t.rank() != 2 || x_t.shape()[0] != 1 || x_t.shape()[1] != w.w_x.shape()[1]) {
    throw ShapeError("lstm_cell: input must be (1 x D) with D=" + std::to_string(w.w_x.shape()[1]) +
                     ", got " + shape_str(x_t.shape()));
  }
  if (state.h.shape() != Shape{1, H} || state.c.shape() != Shape{1, H}) {
    throw ShapeError("lstm_cell: state must be (1 x " + std::to_string(H) + ")");
  }
  // preact = x W_x^T + h W_h^T + b, laid out as [i | f | g | o].
  Tensor preact = add_bias_rows(
      add(matmul(x_t, transpose(w.w_x)), matmul(state.h, transpose(w.w_h))), w.b);
  Tensor gate_i = sigmoid_t(slice_cols(preact, 0, H));
  Tensor gate_f = sigmoid_t(slice_cols(preact, H, 2 * H));
  Tensor gate_g = tanh_t(slice_cols(preact, 2 * H, 3 * H));
  Tensor gate_o = sigmoid_t(slice_cols(preact, 3 * H, 4 * H));
  LstmState next;
  next.c = add(mul(gate_f, state.c), mul(gate_i, gate_g));
  next.h = mul(gate_o, tanh_t(next.c));
  return next;
}

LstmForecaster::LstmForecaster(std::size_t hidden, Rng rng) {
  w_ = LstmWeights::init(1, hidden, rng);
  w_head_ = xavier_uniform({hidden, 1}, hidden, 1, rng);
  b_head_ = Tensor::zeros({1}, true);
}

Tensor LstmForecaster::predict_next(const std::vector<double>& window) const {
  if (window.empty()) throw UsageError("lstm_forecaster: empty window");
  const double last = window.back();
  LstmState state{Tensor::zeros({1, w_.hidden}), Tensor::zeros({1, w_.hidden})};
  for (double v : window) {
    Tensor x_t = Tensor::from_data({1, 1}, {v - last});
    state = lstm_cell(x_t, state, w_);
  }
  Tensor delta = add(matmul(state.h, w_head_), reshape(b_head_, {1, 1}));
  return add_scalar(reshape(delta, {1}), last);
}

std::vector<Tensor> LstmForecaster::parameters() const {
  return {w_.w_x, w_.w_h, w_.b, w_head_, b_head_};
}

std::vector<std::pair<std::string, Tensor>> LstmForecaster::named_parameters() const {
  return {{"lstm.wx", w_.w_x},
          {"lstm.wh", w_.w_h},
          {"lstm.b", w_.b},
          {"head.w", w_head_},
          {"head.b", b_head_}};
}

void LstmForecaster::load_named_parameters(
    const std::vector<std::pair<std::string, Tensor>>& named) {
  auto mine = named_parameters();
  if (mine.size() != named.size()) throw FormatError("checkpoint: lstm tensor count mismatch");
  for (std::size_t i = 0; i < mine.size(); ++i) {
    if (mine[i].first != named[i].first || mine[i].second.shape() != named[i].second.shape()) {
      throw FormatError("checkpoint: tensor '" + named[i].first + "' does not match model");
    }
    std::copy(named[i].second.values().begin(), named[i].second.values().end(),
              mine[i].second.data());
  }
}

}  // namespace cfwb
