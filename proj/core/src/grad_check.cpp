// Copyright (c) 2026 The cfwb Authors
// SPDX-License-Identifier: Apache-2.0

#include "cfwb/grad_check.hpp"

#include <cmath>
#include <limits>

#include "cfwb/attention.hpp"
#include "cfwb/lstm.hpp"
#include "cfwb/model.hpp"
#include "cfwb/ops.hpp"

namespace cfwb {

double grad_check(const std::function<Tensor(std::vector<Tensor>&)>& f, std::vector<Tensor> inputs,
                  double eps) {
  for (Tensor& x : inputs) x.set_requires_grad(true);

  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    Tensor loss = f(inputs);
    if (loss.size() != 1) throw UsageError("grad_check: function must be scalar-valued");
    tape.backward(loss);
    for (Tensor& x : inputs) analytic.push_back(x.grad());
  }

  double worst = 0.0;
  NoTape inference;
  for (std::size_t xi = 0; xi < inputs.size(); ++xi) {
    Tensor& x = inputs[xi];
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double saved = x.data()[i];
      x.data()[i] = saved + eps;
      const double up = f(inputs).item();
      x.data()[i] = saved - eps;
      const double down = f(inputs).item();
      x.data()[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[xi][i];
      const double denom = std::max(1e-8, std::abs(a) + std::abs(numeric));
      const double err = std::abs(a - numeric) / denom;
      if (std::isnan(err)) return std::numeric_limits<double>::infinity();
      worst = std::max(worst, err);
    }
  }
  return worst;
}

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  std::vector<double> v(shape_size(shape));
  for (double& x : v) x = rng.uniform(-scale, scale);
  return Tensor::from_data(std::move(shape), std::move(v));
}

double check_unary(std::uint64_t seed, const std::function<Tensor(const Tensor&)>& op) {
  Rng rng(seed);
  return grad_check(
      [&op](std::vector<Tensor>& xs) { return sum_all(op(xs[0])); },
      {random_tensor({3, 4}, rng)});
}

std::vector<GradCheckCase> build_registry() {
  std::vector<GradCheckCase> reg;

  reg.push_back({"matmul", [](std::uint64_t seed) {
    Rng rng(seed);
    return grad_check([](std::vector<Tensor>& xs) { return sum_all(matmul(xs[0], xs[1])); },
                      {random_tensor({3, 4}, rng), random_tensor({4, 2}, rng)});
  }});

  reg.push_back({"transpose", [](std::uint64_t seed) {
    return check_unary(seed, [](const Tensor& x) { return transpose(x); });
  }});

  reg.push_back({"reshape", [](std::uint64_t seed) {
    return check_unary(seed, [](const Tensor& x) { return reshape(x, {2, 6}); });
  }});

  reg.push_back({"slice_rows", [](std::uint64_t seed) {
    return check_unary(seed, [](const Tensor& x) { return slice_rows(x, 1, 3); });
  }});

  reg.push_back({"slice_cols", [](std::uint64_t seed) {
    return check_unary(seed, [](const Tensor& x) { return slice_cols(x, 1, 3); });
  }});

  reg.push_back({"gather_rows", [](std::uint64_t seed) {
    return check_unary(seed, [](const Tensor& x) {
      return gather_rows(x, {2, 0, 2, 1});
    });
  }});

  reg.push_back({"concat_rows", [](std::uint64_t seed) {
    Rng rng(seed);
    return grad_check(
        [](std::vector<Tensor>& xs) {
          std::vector<Tensor> parts{xs[0], xs[1]};
          return sum_all(mul(concat_rows(parts), concat_rows(parts)));
        },
        {random_tensor({2, 3}, rng), random_tensor({4, 3}, rng)});
  }});

  reg.push_back({"concat_cols", [](std::uint64_t seed) {
    Rng rng(seed);
    return grad_check(
        [](std::vector<Tensor>& xs) {
          std::vector<Tensor> parts{xs[0], xs[1]};
          return sum_all(mul(concat_cols(parts), concat_cols(parts)));
        },
        {random_tensor({3, 2}, rng), random_tensor({3, 4}, rng)});
  }});

  reg.push_back({"add", [](std::uint64_t seed) {
    Rng rng(seed);
    return grad_check(
        [](std::vector<Tensor>& xs) { return sum_all(mul(add(xs[0], xs[1]), xs[0])); },
        {random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)});
  }});

  reg.push_back({"sub", [](std::uint64_t seed) {
    Rng rng(seed);
    return grad_check(
        [](std::vector<Tensor>& xs) { return sum_all(mul(sub(xs[0], xs[1]), xs[1])); },
        {random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)});
  }});

  reg.push_back({"mul", [](std::uint64_t seed) {
    Rng rng(seed);
    return grad_check([](std::vector<Tensor>& xs) { return sum_all(mul(xs[0], xs[1])); },
                      {random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)});
  }});

  reg.push_back({"add_scalar", [](std::uint64_t seed) {
    return check_unary(seed, [](const Tensor& x) { return add_scalar(x, 1.5); });
  }});

  reg.push_back({"mul_scalar", [](std::uint64_t seed) {
    return check_unary(seed, [](const Tensor& x) { return mul_scalar(x, -0.7); });
  }});

  reg.push_back({"add_bias_rows", [](std::uint64_t seed) {
    Rng rng(seed);
    return grad_check(
        [](std::vector<Tensor>& xs) {
          return sum_all(mul(add_bias_rows(xs[0], xs[1]), add_bias_rows(xs[0], xs[1])));
        },
        {random_tensor({3, 4}, rng), random_tensor({4}, rng)});
  }});

  // relu is checked away from the kink; inputs are kept >= 0.2 in magnitude.
  reg.push_back({"relu", [](std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> v(12);
    for (double& x : v) {
      const double m = rng.uniform(0.2, 1.0);
      x = rng.uniform() < 0.5 ? -m : m;
    }
    return grad_check([](std::vector<Tensor>& xs) { return sum_all(mul(relu(xs[0]), xs[0])); },
                      {Tensor::from_data({3, 4}, v)});
  }});

  reg.push_back({"gelu", [](std::uint64_t seed) {
    return check_unary(seed, [](const Tensor& x) { return gelu(x); });
  }});

  reg.push_back({"tanh", [](std::uint64_t seed) {
    return check_unary(seed, [](const Tensor& x) { return tanh_t(x); });
  }});

  reg.push_back({"sigmoid", [](std::uint64_t seed) {
    return check_unary(seed, [](const Tensor& x) { return sigmoid_t(x); });
  }});

  reg.push_back({"layer_norm", [](std::uint64_t seed) {
    Rng rng(seed);
    return grad_check(
        [](std::vector<Tensor>& xs) {
          return sum_all(mul(layer_norm_rows(xs[0], xs[1], xs[2]),
                             layer_norm_rows(xs[0], xs[1], xs[2])));
        },
        {random_tensor({3, 4}, rng), random_tensor({4}, rng), random_tensor({4}, rng)});
  }});

  reg.push_back({"softmax", [](std::uint64_t seed) {
    Rng rng(seed);
    return grad_check(
        [](std::vector<Tensor>& xs) { return sum_all(mul(softmax(xs[0], 1), xs[0])); },
        {random_tensor({3, 4}, rng)});
  }});

  reg.push_back({"masked_softmax", [](std::uint64_t seed) {
    Rng rng(seed);
    return grad_check(
        [](std::vector<Tensor>& xs) {
          const SparsityPattern p = logsparse_pattern(4);
          return sum_all(mul(masked_softmax_rows(xs[0], &p), xs[0]));
        },
        {random_tensor({4, 4}, rng)});
  }});

  reg.push_back({"causal_conv1d", [](std::uint64_t seed) {
    Rng rng(seed);
    return grad_check(
        [](std::vector<Tensor>& xs) { return sum_all(mul(causal_conv1d(xs[0], xs[1]),
                                                         causal_conv1d(xs[0], xs[1]))); },
        {random_tensor({5, 3}, rng), random_tensor({2, 3, 4}, rng)});
  }});

  reg.push_back({"embedding", [](std::uint64_t seed) {
    Rng rng(seed);
    return grad_check(
        [](std::vector<Tensor>& xs) {
          return sum_all(mul(embedding({1, 0, 2, 1}, xs[0]), embedding({1, 0, 2, 1}, xs[0])));
        },
        {random_tensor({3, 4}, rng)});
  }});

  reg.push_back({"sum", [](std::uint64_t seed) {
    return check_unary(seed, [](const Tensor& x) { return sum_all(mul(x, x)); });
  }});

  reg.push_back({"mean", [](std::uint64_t seed) {
    return check_unary(seed, [](const Tensor& x) { return mean_all(mul(x, x)); });
  }});

  reg.push_back({"mse", [](std::uint64_t seed) {
    Rng rng(seed);
    return grad_check([](std::vector<Tensor>& xs) { return mse_loss(xs[0], xs[1]); },
                      {random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)});
  }});

  reg.push_back({"cross_entropy", [](std::uint64_t seed) {
    Rng rng(seed);
    return grad_check(
        [](std::vector<Tensor>& xs) { return cross_entropy_loss(xs[0], {2, 0, 4}); },
        {random_tensor({3, 5}, rng)});
  }});

  reg.push_back({"scaled_dot_attention", [](std::uint64_t seed) {
    Rng rng(seed);
    return grad_check(
        [](std::vector<Tensor>& xs) {
          const SparsityPattern p = full_causal_pattern(4);
          return sum_all(mul(scaled_dot_attention(xs[0], xs[1], xs[2], &p),
                             scaled_dot_attention(xs[0], xs[1], xs[2], &p)));
        },
        {random_tensor({4, 3}, rng), random_tensor({4, 3}, rng), random_tensor({4, 2}, rng)});
  }});

  reg.push_back({"multi_head_attention", [](std::uint64_t seed) {
    Rng rng(seed);
    Rng wrng = rng.substream("weights");
    auto weights = std::make_shared<AttentionWeights>(AttentionWeights::init(8, 2, 4, 4, wrng));
    std::vector<Tensor> inputs{random_tensor({4, 8}, rng)};
    auto all = weights->parameters();
    inputs.insert(inputs.end(), all.begin(), all.end());
    return grad_check(
        [weights](std::vector<Tensor>& xs) {
          const SparsityPattern p = full_causal_pattern(4);
          Tensor out = multi_head_attention(xs[0], xs[0], *weights, &p);
          return sum_all(mul(out, out));
        },
        inputs);
  }});

  reg.push_back({"conv_self_attention", [](std::uint64_t seed) {
    Rng rng(seed);
    Rng wrng = rng.substream("weights");
    auto weights =
        std::make_shared<AttentionWeights>(AttentionWeights::init(6, 2, 3, 3, wrng, 3));
    std::vector<Tensor> inputs{random_tensor({5, 6}, rng)};
    auto all = weights->parameters();
    inputs.insert(inputs.end(), all.begin(), all.end());
    return grad_check(
        [weights](std::vector<Tensor>& xs) {
          const SparsityPattern p = full_causal_pattern(5);
          Tensor out = conv_self_attention(xs[0], *weights, &p);
          return sum_all(mul(out, out));
        },
        inputs);
  }});

  reg.push_back({"axial_attention", [](std::uint64_t seed) {
    Rng rng(seed);
    Rng wrng = rng.substream("weights");
    auto wr = std::make_shared<AttentionWeights>(AttentionWeights::init(4, 1, 4, 4, wrng));
    auto wc = std::make_shared<AttentionWeights>(AttentionWeights::init(4, 1, 4, 4, wrng));
    std::vector<Tensor> inputs{random_tensor({3, 2, 4}, rng)};
    for (const auto& t : wr->parameters()) inputs.push_back(t);
    for (const auto& t : wc->parameters()) inputs.push_back(t);
    return grad_check(
        [wr, wc](std::vector<Tensor>& xs) {
          Tensor out = axial_attention(xs[0], *wr, *wc);
          return sum_all(mul(out, out));
        },
        inputs);
  }});

  reg.push_back({"pointwise_ffn", [](std::uint64_t seed) {
    Rng rng(seed);
    return grad_check(
        [](std::vector<Tensor>& xs) {
          Tensor out = pointwise_ffn(xs[0], xs[1], xs[2], xs[3], xs[4]);
          return sum_all(mul(out, out));
        },
        {random_tensor({3, 4}, rng), random_tensor({4, 6}, rng), random_tensor({6}, rng),
         random_tensor({6, 4}, rng), random_tensor({4}, rng)});
  }});

  reg.push_back({"decoder_block", [](std::uint64_t seed) {
    Rng rng(seed);
    Rng wrng = rng.substream("weights");
    TransformerConfig cfg;
    cfg.d_model = 8;
    cfg.heads = 2;
    cfg.d_k = 4;
    cfg.d_v = 4;
    cfg.d_ff = 16;
    cfg.n_layers = 1;
    cfg.input_dim = 8;
    auto block = std::make_shared<DecoderBlockParams>(DecoderBlockParams::init(cfg, wrng, false));
    std::vector<Tensor> inputs{random_tensor({4, 8}, rng)};
    for (const auto& t : block->parameters()) inputs.push_back(t);
    return grad_check(
        [block](std::vector<Tensor>& xs) {
          const SparsityPattern p = full_causal_pattern(4);
          Tensor out = decoder_block(xs[0], *block, &p);
          return sum_all(mul(out, out));
        },
        inputs);
  }});

  reg.push_back({"lstm_cell", [](std::uint64_t seed) {
    Rng rng(seed);
    Rng wrng = rng.substream("weights");
    auto weights = std::make_shared<LstmWeights>(LstmWeights::init(3, 4, wrng));
    std::vector<Tensor> inputs{random_tensor({1, 3}, rng), random_tensor({1, 4}, rng),
                               random_tensor({1, 4}, rng)};
    for (const auto& t : weights->parameters()) inputs.push_back(t);
    return grad_check(
        [weights](std::vector<Tensor>& xs) {
          LstmState s{xs[1], xs[2]};
          LstmState next = lstm_cell(xs[0], s, *weights);
          return sum_all(mul(next.h, add(next.c, next.h)));
        },
        inputs);
  }});

  reg.push_back({"transformer_2layer_2head", [](std::uint64_t seed) {
    TransformerConfig cfg;
    cfg.d_model = 8;
    cfg.heads = 2;
    cfg.d_k = 4;
    cfg.d_v = 4;
    cfg.d_ff = 16;
    cfg.n_layers = 2;
    cfg.vocab_size = 11;
    cfg.max_len = 8;
    auto model = std::make_shared<GptModel>(cfg, Rng(seed ^ 0xc0ffee));
    const std::vector<int> tokens{1, 4, 2, 9, 0, 5};  // T = 6
    return grad_check(
        [model, tokens](std::vector<Tensor>&) {
          return cross_entropy_loss(model->forward(tokens), {4, 2, 9, 0, 5, 1});
        },
        model->parameters());
  }});

  reg.push_back({"lstm_unroll", [](std::uint64_t seed) {
    Rng rng(seed);
    auto model = std::make_shared<LstmForecaster>(4, Rng(seed ^ 0x5a5a));
    std::vector<Tensor> inputs = model->parameters();
    const std::vector<double> window{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1),
                                     rng.uniform(-1, 1)};
    return grad_check(
        [model, window](std::vector<Tensor>&) {
          Tensor out = model->predict_next(window);
          return sum_all(mul(out, out));
        },
        inputs);
  }});

  return reg;
}

}  // namespace

const std::vector<GradCheckCase>& gradcheck_registry() {
  static const std::vector<GradCheckCase> registry = build_registry();
  return registry;
}

}  // namespace cfwb
