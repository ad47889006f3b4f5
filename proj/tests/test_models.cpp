#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <thread>

#include "cfwb/checkpoint.hpp"
#include "cfwb/grad_check.hpp"
#include "cfwb/lstm.hpp"
#include "cfwb/model.hpp"
#include "cfwb/train.hpp"

using namespace cfwb;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  std::vector<double> v(shape_size(shape));
  for (double& x : v) x = rng.uniform(-scale, scale);
  return Tensor::from_data(std::move(shape), std::move(v));
}

TransformerConfig small_config() {
  TransformerConfig cfg;
  cfg.d_model = 8;
  cfg.heads = 2;
  cfg.d_k = 4;
  cfg.d_v = 4;
  cfg.d_ff = 16;
  cfg.n_layers = 2;
  cfg.vocab_size = 11;
  cfg.max_len = 32;
  return cfg;
}

void zero_output_projections(DecoderBlockParams& block) {
  auto zero = [](Tensor& t) { std::fill(t.data(), t.data() + t.size(), 0.0); };
  zero(block.attn.w_o);
  zero(block.ffn.w2);
  zero(block.ffn.b2);
  if (block.cross_attn) zero(block.cross_attn->w_o);
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("sinusoidal pe: row zero alternates 0,1 and pe[1][0]=sin(1)") {
  Tensor pe = sinusoidal_pe(4, 6);
  for (std::size_t i = 0; i < 6; i += 2) {
    CHECK(pe.at(0, i) == 0.0);
    CHECK(pe.at(0, i + 1) == 1.0);
  }
  CHECK(pe.at(1, 0) == doctest::Approx(0.8414709848).epsilon(1e-9));
  CHECK_THROWS_AS(sinusoidal_pe(4, 5), ConfigError);
}

TEST_CASE("sinusoidal pe rows are pairwise distinct") {
  Tensor pe = sinusoidal_pe(512, 32);
  double min_dist = 1e300;
  for (std::size_t a = 0; a < 512; ++a) {
    for (std::size_t b = a + 1; b < 512; ++b) {
      double d = 0;
      for (std::size_t j = 0; j < 32; ++j) {
        const double diff = pe.at(a, j) - pe.at(b, j);
        d += diff * diff;
      }
      min_dist = std::min(min_dist, d);
    }
  }
  CHECK(min_dist > 0.0);
}

TEST_CASE("pointwise ffn is position-wise and permutation covariant") {
  Rng rng(1);
  FfnParams p = FfnParams::init(4, 8, rng);
  Tensor x = random_tensor({5, 4}, rng);
  Tensor y = pointwise_ffn(x, p);

  const std::vector<std::size_t> perm{4, 2, 0, 1, 3};
  std::vector<double> permuted(5 * 4);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 4; ++j) permuted[i * 4 + j] = x.at(perm[i], j);
  Tensor yp = pointwise_ffn(Tensor::from_data({5, 4}, permuted), p);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 4; ++j) CHECK(yp.at(i, j) == y.at(perm[i], j));

  // Zero weights and biases: zero output.
  FfnParams zero;
  zero.w1 = Tensor::zeros({4, 8}, true);
  zero.b1 = Tensor::zeros({8}, true);
  zero.w2 = Tensor::zeros({8, 4}, true);
  zero.b2 = Tensor::zeros({4}, true);
  Tensor z = pointwise_ffn(x, zero);
  for (std::size_t i = 0; i < z.size(); ++i) CHECK(z.at(i) == 0.0);
}

TEST_CASE("pointwise ffn relu-path hand value") {
  // One row [-1, 2], W1 = I, relu, W2 = I via gelu? use explicit relu math:
  // the op uses GELU, so check a hand-computed GELU value instead.
  Tensor x = Tensor::from_data({1, 2}, {-1.0, 2.0});
  Tensor w1 = Tensor::from_data({2, 2}, {1, 0, 0, 1});
  Tensor b1 = Tensor::zeros({2});
  Tensor w2 = Tensor::from_data({2, 2}, {1, 0, 0, 1});
  Tensor b2 = Tensor::zeros({2});
  Tensor y = pointwise_ffn(x, w1, b1, w2, b2);
  auto gelu_ref = [](double v) {
    return 0.5 * v * (1.0 + std::tanh(0.7978845608028654 * (v + 0.044715 * v * v * v)));
  };
  CHECK(y.at(0, 0) == doctest::Approx(gelu_ref(-1.0)).epsilon(1e-12));
  CHECK(y.at(0, 1) == doctest::Approx(gelu_ref(2.0)).epsilon(1e-12));
}

TEST_CASE("decoder block with zeroed output projections is the identity") {
  Rng rng(2);
  TransformerConfig cfg = small_config();
  DecoderBlockParams block = DecoderBlockParams::init(cfg, rng, false);
  zero_output_projections(block);
  Tensor x = random_tensor({6, 8}, rng);
  const SparsityPattern p = full_causal_pattern(6);
  Tensor y = decoder_block(x, block, &p);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(y.at(i) == x.at(i));  // exact
}

TEST_CASE("decoder block preserves causality and passes grad check") {
  Rng rng(3);
  TransformerConfig cfg = small_config();
  cfg.n_layers = 1;
  DecoderBlockParams block = DecoderBlockParams::init(cfg, rng, false);
  const SparsityPattern p = full_causal_pattern(4);

  Tensor x = random_tensor({4, 8}, rng);
  Tensor base = decoder_block(x, block, &p);
  std::vector<double> data = x.values();
  for (std::size_t j = 0; j < 8; ++j) data[2 * 8 + j] += 1.0;
  Tensor out = decoder_block(Tensor::from_data({4, 8}, data), block, &p);
  for (std::size_t t = 0; t < 2; ++t)
    for (std::size_t j = 0; j < 8; ++j) CHECK(out.at(t, j) == base.at(t, j));

  auto shared = std::make_shared<DecoderBlockParams>(block);
  std::vector<Tensor> inputs{x};
  for (const auto& t : shared->parameters()) inputs.push_back(t);
  const double err = grad_check(
      [shared](std::vector<Tensor>& xs) {
        const SparsityPattern pat = full_causal_pattern(4);
        Tensor out = decoder_block(xs[0], *shared, &pat);
        return sum_all(mul(out, out));
      },
      inputs);
  CHECK(err < 1e-4);
}

TEST_CASE("decoder block rejects sequences beyond max_len via models") {
  Rng rng(4);
  TransformerConfig cfg = small_config();
  cfg.max_len = 4;
  GptModel model(cfg, rng);
  CHECK_THROWS_AS(model.forward({1, 2, 3, 4, 5}), UsageError);
}

TEST_CASE("gpt forward: shapes, finiteness, causality") {
  Rng rng(5);
  GptModel model(small_config(), rng);
  Tensor one = model.forward({3});
  CHECK(one.shape() == Shape{1, 11});
  for (std::size_t i = 0; i < one.size(); ++i) CHECK(std::isfinite(one.at(i)));

  // Changing the last token leaves earlier logits bit-identical.
  Tensor base = model.forward({1, 2, 3, 4});
  Tensor poked = model.forward({1, 2, 3, 9});
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t v = 0; v < 11; ++v) CHECK(poked.at(t, v) == base.at(t, v));

  CHECK_THROWS_AS(model.forward({1, 99}), DataError);
}

TEST_CASE("gpt causality holds for every mask kind") {
  for (auto kind : {MaskKind::kFull, MaskKind::kStrided, MaskKind::kLogSparse}) {
    Rng rng(6);
    TransformerConfig cfg = small_config();
    cfg.mask_kind = kind;
    GptModel model(cfg, rng);
    Tensor base = model.forward({1, 2, 3, 4, 5, 6});
    Tensor poked = model.forward({1, 2, 3, 4, 5, 10});
    for (std::size_t t = 0; t < 5; ++t)
      for (std::size_t v = 0; v < 11; ++v) {
        INFO("mask ", to_string(kind));
        CHECK(poked.at(t, v) == base.at(t, v));
      }
  }
}

TEST_CASE("gpt with zero layers is embedding+pe through the projection") {
  Rng rng(7);
  TransformerConfig cfg = small_config();
  cfg.n_layers = 0;
  GptModel model(cfg, rng);
  auto named = model.named_parameters();
  REQUIRE(named.size() == 2);  // embed.tokens, head.out
  const Tensor& table = named[0].second;
  const Tensor& w_out = named[1].second;

  const std::vector<int> tokens{4, 7};
  Tensor logits = model.forward(tokens);
  Tensor pe = sinusoidal_pe(cfg.max_len, cfg.d_model);
  Tensor manual = matmul(add(embedding(tokens, table), slice_rows(pe, 0, 2)), w_out);
  for (std::size_t i = 0; i < logits.size(); ++i)
    CHECK(logits.at(i) == doctest::Approx(manual.at(i)).epsilon(1e-12));
}

TEST_CASE("full 2-layer 2-head model passes grad check end to end") {
  Rng rng(8);
  TransformerConfig cfg = small_config();  // d_model 8, 2 heads, 2 layers
  auto model = std::make_shared<GptModel>(cfg, rng);
  const std::vector<int> tokens{1, 4, 2, 9, 0, 5};  // T=6
  std::vector<Tensor> params = model->parameters();
  const double err = grad_check(
      [model, tokens](std::vector<Tensor>&) {
        return cross_entropy_loss(model->forward(tokens), {4, 2, 9, 0, 5, 1});
      },
      params);
  CHECK(err < 1e-4);
}

TEST_CASE("encoder-decoder: rejects empty target, cross-attention is global") {
  Rng rng(9);
  TransformerConfig cfg = small_config();
  cfg.input_dim = 3;
  EncoderDecoderModel model(cfg, rng);
  Tensor src = random_tensor({5, 3}, rng);
  CHECK_THROWS_AS(model.forward(src, {}), UsageError);

  Tensor base = model.forward(src, {1, 2, 3});
  // Perturb the FIRST source row: every target logit may move; require the
  // effect to be visibly nonzero for generic weights.
  std::vector<double> data = src.values();
  data[0] += 1.0;
  Tensor out = model.forward(Tensor::from_data({5, 3}, data), {1, 2, 3});
  double delta = 0;
  for (std::size_t i = 0; i < base.size(); ++i) delta += std::abs(out.at(i) - base.at(i));
  CHECK(delta > 1e-8);

  // Decoder self-attention stays causal.
  Tensor poked = model.forward(src, {1, 2, 9});
  for (std::size_t t = 0; t < 2; ++t)
    for (std::size_t v = 0; v < cfg.vocab_size; ++v) CHECK(poked.at(t, v) == base.at(t, v));
}

TEST_CASE("lstm cell closed forms") {
  Rng rng(10);
  LstmWeights w = LstmWeights::init(2, 3, rng);
  // Zero all weights and biases.
  for (Tensor t : w.parameters()) std::fill(t.data(), t.data() + t.size(), 0.0);

  LstmState s0{Tensor::zeros({1, 3}), Tensor::zeros({1, 3})};
  Tensor x = Tensor::from_data({1, 2}, {0.4, -0.2});
  LstmState s1 = lstm_cell(x, s0, w);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(s1.c.at(0, i) == 0.0);
    CHECK(s1.h.at(0, i) == 0.0);
  }

  // c0 nonzero: c' = 0.5*c0, h' = 0.5*tanh(0.5*c0) since every gate is 0.5.
  LstmState sc{Tensor::zeros({1, 3}), Tensor::from_data({1, 3}, {1.0, -2.0, 0.25})};
  LstmState s2 = lstm_cell(x, sc, w);
  for (std::size_t i = 0; i < 3; ++i) {
    const double c0 = sc.c.at(0, i);
    CHECK(s2.c.at(0, i) == doctest::Approx(0.5 * c0).epsilon(1e-12));
    CHECK(s2.h.at(0, i) == doctest::Approx(0.5 * std::tanh(0.5 * c0)).epsilon(1e-12));
  }
}

TEST_CASE("lstm gates stay in (0,1) and states stay finite for large inputs") {
  Rng rng(11);
  LstmWeights w = LstmWeights::init(1, 4, rng);
  LstmState s{Tensor::zeros({1, 4}), Tensor::zeros({1, 4})};
  for (int step = 0; step < 50; ++step) {
    Tensor x = Tensor::from_data({1, 1}, {rng.uniform(-1e3, 1e3)});
    s = lstm_cell(x, s, w);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(std::isfinite(s.c.at(0, i)));
      CHECK(std::isfinite(s.h.at(0, i)));
      CHECK(std::abs(s.h.at(0, i)) <= 1.0);  // |h| = |o*tanh(c)| < 1
    }
  }
}

TEST_CASE("lstm forecaster: L=1 equals one cell step plus head") {
  Rng rng(12);
  LstmForecaster model(3, Rng(77));
  const std::vector<double> window{0.6};
  Tensor pred = model.predict_next(window);
  CHECK(pred.size() == 1);
  CHECK(std::isfinite(pred.item()));

  Tensor again = model.predict_next(window);
  CHECK(pred.item() == again.item());  // no stochastic ops

  CHECK_THROWS_AS(model.predict_next({}), UsageError);
}

TEST_CASE("lstm forecaster unroll passes grad check") {
  auto model = std::make_shared<LstmForecaster>(4, Rng(13));
  const std::vector<double> window{0.1, -0.4, 0.3, 0.9};
  std::vector<Tensor> params = model->parameters();
  const double err = grad_check(
      [model, window](std::vector<Tensor>&) {
        Tensor out = model->predict_next(window);
        return sum_all(mul(out, out));
      },
      params);
  CHECK(err < 1e-4);
}

TEST_CASE("train loop: trace length, divergence abort, determinism") {
  auto make_params = [] {
    return std::vector<Tensor>{Tensor::from_data({2}, {3.0, -1.5}, true)};
  };
  AdamConfig adam;
  adam.lr = 1e-2;

  // steps=1 -> one-entry trace.
  {
    auto params = make_params();
    TrainResult r = train_loop(
        params, [&params](std::size_t, Rng&) { return sum_all(mul(params[0], params[0])); }, 1,
        adam, Rng(0));
    CHECK(r.loss_trace.size() == 1);
  }

  // Quadratic toy objective falls monotonically over 100 steps.
  {
    auto params = make_params();
    TrainResult r = train_loop(
        params, [&params](std::size_t, Rng&) { return sum_all(mul(params[0], params[0])); }, 100,
        adam, Rng(0));
    CHECK(r.loss_trace.front() > r.loss_trace.back());
    for (std::size_t i = 1; i < r.loss_trace.size(); ++i)
      CHECK(r.loss_trace[i] <= r.loss_trace[i - 1] + 1e-12);
  }

  // Same seed twice: identical traces, identical weights.
  auto run = [&adam] {
    std::vector<Tensor> params{Tensor::from_data({3}, {1.0, 2.0, 3.0}, true)};
    TrainResult r = train_loop(
        params,
        [&params](std::size_t, Rng& rng) {
          Tensor noise = Tensor::from_data({3}, {rng.uniform(), rng.uniform(), rng.uniform()});
          return mse_loss(params[0], noise);
        },
        50, adam, Rng(42).substream("batch"));
    auto out = r.loss_trace;
    out.insert(out.end(), params[0].values().begin(), params[0].values().end());
    return out;
  };
  CHECK(run() == run());

  // NaN loss aborts with the step number in the message.
  {
    auto params = make_params();
    CHECK_THROWS_WITH_AS(
        train_loop(
            params,
            [&params](std::size_t step, Rng&) {
              if (step == 3) return mul_scalar(sum_all(params[0]), std::nan(""));
              return sum_all(mul(params[0], params[0]));
            },
            10, adam, Rng(0)),
        doctest::Contains("step 3"), NumericError);
  }
}

TEST_CASE("checkpoint round-trips bit-exactly") {
  Rng rng(21);
  Checkpoint ckpt;
  ckpt.config = {{"d_model", "8"}, {"kind", "test"}, {"seed", "21"}};
  ckpt.tensors.emplace_back("a.weight", random_tensor({3, 5}, rng));
  ckpt.tensors.emplace_back("b.bias", random_tensor({7}, rng, 1e6));
  ckpt.tensors.emplace_back("c.kernel", random_tensor({2, 3, 4}, rng, 1e-9));

  const auto path = temp_file("cfwb_ckpt_test.bin");
  save_checkpoint(path.string(), ckpt);
  Checkpoint loaded = load_checkpoint(path.string());
  CHECK(loaded.config == ckpt.config);
  REQUIRE(loaded.tensors.size() == ckpt.tensors.size());
  for (std::size_t i = 0; i < ckpt.tensors.size(); ++i) {
    CHECK(loaded.tensors[i].first == ckpt.tensors[i].first);
    CHECK(loaded.tensors[i].second.shape() == ckpt.tensors[i].second.shape());
    CHECK(loaded.tensors[i].second.values() == ckpt.tensors[i].second.values());  // bit-exact
  }

  // Second save of the loaded checkpoint writes identical bytes.
  const auto path2 = temp_file("cfwb_ckpt_test2.bin");
  save_checkpoint(path2.string(), loaded);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(b1 == b2);
  std::filesystem::remove(path);
  std::filesystem::remove(path2);
}

TEST_CASE("gpt model save/load reproduces forward bit-exactly") {
  Rng rng(22);
  TransformerConfig cfg = small_config();
  GptModel model(cfg, rng);
  const std::vector<int> tokens{1, 2, 3, 4, 5};
  Tensor before = model.forward(tokens);

  Checkpoint ckpt;
  for (const auto& [k, v] : cfg.to_kv()) ckpt.config[k] = v;
  ckpt.tensors = model.named_parameters();
  const auto path = temp_file("cfwb_gpt_ckpt.bin");
  save_checkpoint(path.string(), ckpt);

  Checkpoint loaded = load_checkpoint(path.string());
  std::map<std::string, std::string> kv(loaded.config.begin(), loaded.config.end());
  GptModel restored(TransformerConfig::from_kv(kv), Rng(999));
  restored.load_named_parameters(loaded.tensors);
  Tensor after = restored.forward(tokens);
  CHECK(before.values() == after.values());
  std::filesystem::remove(path);
}

TEST_CASE("frozen model is safe to share across threads") {
  Rng rng(23);
  GptModel model(small_config(), rng);
  const std::vector<int> tokens{1, 2, 3, 4};
  Tensor expected = model.forward(tokens);

  std::vector<std::vector<double>> results(4);
  std::vector<std::thread> pool;
  for (int i = 0; i < 4; ++i) {
    pool.emplace_back([&model, &results, tokens, i] {
      Tensor out = model.forward(tokens);
      results[i] = out.values();
    });
  }
  for (auto& th : pool) th.join();
  for (const auto& r : results) CHECK(r == expected.values());
}

TEST_CASE("transformer config validation") {
  TransformerConfig cfg = small_config();
  cfg.d_v = 3;  // heads*d_v != d_model
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  TransformerConfig kv_cfg = small_config();
  const auto kv = kv_cfg.to_kv();
  TransformerConfig back = TransformerConfig::from_kv({kv.begin(), kv.end()});
  CHECK(back.d_model == kv_cfg.d_model);
  CHECK(back.vocab_size == kv_cfg.vocab_size);
  CHECK(to_string(back.mask_kind) == "full");
}
