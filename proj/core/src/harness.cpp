// Copyright (c) 2026 The cfwb Authors
// SPDX-License-Identifier: Apache-2.0

#include "cfwb/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "cfwb/train.hpp"

namespace cfwb {

namespace {

int sign_of(double v) { return v > 0.0 ? 1 : (v < 0.0 ? -1 : 0); }

constexpr double kStdFloor = 1e-8;

}  // namespace

std::pair<WindowSet, WindowSet> make_windows(const Series& series, std::size_t l_in,
                                             std::size_t l_out, std::size_t stride,
                                             double split_fraction) {
  const std::size_t n = series.size();
  const std::size_t len = l_in + l_out;
  if (l_in < 1 || l_out < 1) throw UsageError("make_windows: window lengths must be >= 1");
  if (stride < 1) throw UsageError("make_windows: stride must be >= 1");
  if (len > n) {
    throw UsageError("make_windows: series has " + std::to_string(n) + " points but " +
                     std::to_string(len) + " are required per window");
  }
  if (split_fraction <= 0.0 || split_fraction >= 1.0) {
    throw UsageError("make_windows: split_fraction must be in (0, 1)");
  }
  const std::size_t split_idx = static_cast<std::size_t>(std::floor(split_fraction * n));

  WindowSet train, valid;
  for (std::size_t s = 0; s + len <= n; s += stride) {
    std::vector<double> input(series.values.begin() + s, series.values.begin() + s + l_in);
    std::vector<double> target(series.values.begin() + s + l_in, series.values.begin() + s + len);
    if (s + len <= split_idx) {
      train.inputs.push_back(std::move(input));
      train.targets.push_back(std::move(target));
    } else if (s >= split_idx) {
      valid.inputs.push_back(std::move(input));
      valid.targets.push_back(std::move(target));
    }
    // Windows spanning the split boundary are dropped.
  }
  if (train.inputs.empty()) throw UsageError("make_windows: no training windows before the split");

  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& w : train.inputs) {
    for (double v : w) sum += v;
    count += w.size();
  }
  const double mean = sum / static_cast<double>(count);
  double var = 0.0;
  for (const auto& w : train.inputs)
    for (double v : w) var += (v - mean) * (v - mean);
  var /= static_cast<double>(count);
  const double stddev = std::max(std::sqrt(var), kStdFloor);

  for (WindowSet* ws : {&train, &valid}) {
    ws->mean = mean;
    ws->stddev = stddev;
    for (auto& w : ws->inputs)
      for (double& v : w) v = (v - mean) / stddev;
    for (auto& w : ws->targets)
      for (double& v : w) v = (v - mean) / stddev;
  }
  return {std::move(train), std::move(valid)};
}

ForecastMetrics forecast_metrics(const std::vector<double>& predicted,
                                 const std::vector<double>& actual) {
  if (predicted.size() != actual.size()) {
    throw UsageError("metrics: length mismatch " + std::to_string(predicted.size()) + " vs " +
                     std::to_string(actual.size()));
  }
  if (predicted.size() < 2) throw UsageError("metrics: need at least 2 points for deltas");
  ForecastMetrics m;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double d = predicted[i] - actual[i];
    m.mse += d * d;
    m.mae += std::abs(d);
  }
  m.mse /= static_cast<double>(predicted.size());
  m.mae /= static_cast<double>(predicted.size());
  std::size_t matches = 0;
  for (std::size_t i = 1; i < predicted.size(); ++i) {
    if (sign_of(predicted[i] - predicted[i - 1]) == sign_of(actual[i] - actual[i - 1])) ++matches;
  }
  m.directional_accuracy = static_cast<double>(matches) / static_cast<double>(predicted.size() - 1);
  return m;
}

std::vector<double> last_value_forecast(const std::vector<double>& context, std::size_t horizon) {
  if (context.empty()) throw UsageError("last_value_forecast: empty context");
  if (horizon < 1) throw UsageError("last_value_forecast: horizon must be >= 1");
  return std::vector<double>(horizon, context.back());
}

std::vector<double> seasonal_naive_forecast(const std::vector<double>& context,
                                            std::size_t horizon, std::size_t period) {
  if (period < 1) throw UsageError("seasonal_naive_forecast: period must be >= 1");
  if (context.size() < period) {
    throw UsageError("seasonal_naive_forecast: context length " + std::to_string(context.size()) +
                     " is shorter than period " + std::to_string(period));
  }
  if (horizon < 1) throw UsageError("seasonal_naive_forecast: horizon must be >= 1");
  std::vector<double> out(horizon);
  const std::size_t base = context.size() - period;
  for (std::size_t i = 0; i < horizon; ++i) out[i] = context[base + (i % period)];
  return out;
}

std::vector<double> forecast_rollout(const StepPredictor& step, std::vector<double> context_raw,
                                     std::size_t horizon, const WindowSet& norm) {
  if (horizon < 1) throw UsageError("forecast_rollout: horizon must be >= 1");
  if (context_raw.empty()) throw UsageError("forecast_rollout: empty context");
  std::vector<double> window(context_raw.size());
  for (std::size_t i = 0; i < context_raw.size(); ++i) window[i] = norm.normalize(context_raw[i]);
  std::vector<double> out;
  out.reserve(horizon);
  for (std::size_t i = 0; i < horizon; ++i) {
    const double pred = step(window);
    out.push_back(norm.denormalize(pred));
    window.erase(window.begin());
    window.push_back(pred);
  }
  return out;
}

ForecastMetrics evaluate_one_step(const StepPredictor& step, const WindowSet& valid) {
  if (valid.inputs.size() < 2) throw UsageError("evaluate_one_step: need >= 2 validation windows");
  NoTape inference;
  std::vector<double> predicted, actual;
  predicted.reserve(valid.inputs.size());
  actual.reserve(valid.inputs.size());
  for (std::size_t i = 0; i < valid.inputs.size(); ++i) {
    predicted.push_back(valid.denormalize(step(valid.inputs[i])));
    actual.push_back(valid.denormalize(valid.targets[i][0]));
  }
  return forecast_metrics(predicted, actual);
}

namespace {

ForecasterTrainResult train_one_step_model(std::vector<Tensor> params,
                                           const std::function<Tensor(const std::vector<double>&)>& predict,
                                           const WindowSet& train, const WindowSet& valid,
                                           std::size_t steps, double lr, std::size_t batch,
                                           std::uint64_t seed) {
  if (train.inputs.empty()) throw UsageError("train_forecaster: empty training set");
  if (batch < 1) throw UsageError("train_forecaster: batch must be >= 1");
  AdamConfig adam;
  adam.lr = lr;
  Rng rng = Rng(seed).substream("batch");
  const std::size_t n = train.inputs.size();
  auto loss_fn = [&](std::size_t, Rng& r) {
    Tensor acc = Tensor::scalar(0.0);
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t i = static_cast<std::size_t>(r.uniform_int(0, static_cast<std::int64_t>(n) - 1));
      Tensor pred = predict(train.inputs[i]);
      Tensor diff = add_scalar(pred, -train.targets[i][0]);
      acc = add(acc, mul(diff, diff));
    }
    return mul_scalar(acc, 1.0 / static_cast<double>(batch));
  };
  TrainResult tr = train_loop(params, loss_fn, steps, adam, rng);

  ForecasterTrainResult result;
  result.loss_trace = std::move(tr.loss_trace);
  result.validation = evaluate_one_step(
      [&predict](const std::vector<double>& w) {
        NoTape inference;
        return predict(w).item();
      },
      valid);
  return result;
}

}  // namespace

ForecasterTrainResult train_forecaster(TransformerForecaster& model, const WindowSet& train,
                                       const WindowSet& valid, std::size_t steps, double lr,
                                       std::size_t batch, std::uint64_t seed) {
  return train_one_step_model(
      model.parameters(),
      [&model](const std::vector<double>& w) { return model.predict_next(w); }, train, valid,
      steps, lr, batch, seed);
}

ForecasterTrainResult train_forecaster(LstmForecaster& model, const WindowSet& train,
                                       const WindowSet& valid, std::size_t steps, double lr,
                                       std::size_t batch, std::uint64_t seed) {
  return train_one_step_model(
      model.parameters(),
      [&model](const std::vector<double>& w) { return model.predict_next(w); }, train, valid,
      steps, lr, batch, seed);
}

ForecasterTrainResult train_forecaster(EncDecForecaster& model, const WindowSet& train,
                                       const WindowSet& valid, std::size_t steps, double lr,
                                       std::size_t batch, std::uint64_t seed) {
  return train_one_step_model(
      model.parameters(),
      [&model](const std::vector<double>& w) { return model.predict_next(w); }, train, valid,
      steps, lr, batch, seed);
}

CompareReport compare_experiment(const Series& series, const CompareConfig& cfg) {
  auto [train, valid] = make_windows(series, cfg.window, 1, cfg.stride, cfg.split_fraction);

  TransformerConfig tf = cfg.transformer;
  tf.input_dim = 1;
  tf.vocab_size = 0;
  tf.max_len = std::max(tf.max_len, cfg.window);
  tf.seed = cfg.seed;

  CompareReport report;
  report.config = cfg;
  report.config.transformer = tf;

  const std::size_t split_idx =
      static_cast<std::size_t>(std::floor(cfg.split_fraction * series.size()));
  if (split_idx < cfg.window) throw UsageError("compare_experiment: split before first window");
  std::vector<double> rollout_context(series.values.begin() + (split_idx - cfg.window),
                                      series.values.begin() + split_idx);
  const std::size_t horizon =
      std::min(cfg.horizon, series.size() - split_idx);
  if (horizon < 1) throw UsageError("compare_experiment: no room after split for the rollout");
  report.rollout_actual.assign(series.values.begin() + split_idx,
                               series.values.begin() + split_idx + horizon);

  {
    TransformerForecaster model(tf, Rng(cfg.seed).substream("init-transformer"));
    ForecasterTrainResult r =
        train_forecaster(model, train, valid, cfg.steps, cfg.lr, cfg.batch, cfg.seed);
    ModelReport mr;
    mr.name = "transformer";
    mr.validation = r.validation;
    mr.loss_trace = std::move(r.loss_trace);
    mr.rollout = forecast_rollout(
        [&model](const std::vector<double>& w) {
          NoTape inference;
          return model.predict_next(w).item();
        },
        rollout_context, horizon, train);
    report.models.push_back(std::move(mr));
  }
  {
    LstmForecaster model(cfg.lstm_hidden, Rng(cfg.seed).substream("init-lstm"));
    ForecasterTrainResult r =
        train_forecaster(model, train, valid, cfg.steps, cfg.lr, cfg.batch, cfg.seed);
    ModelReport mr;
    mr.name = "lstm";
    mr.validation = r.validation;
    mr.loss_trace = std::move(r.loss_trace);
    mr.rollout = forecast_rollout(
        [&model](const std::vector<double>& w) {
          NoTape inference;
          return model.predict_next(w).item();
        },
        rollout_context, horizon, train);
    report.models.push_back(std::move(mr));
  }
  {
    ModelReport mr;
    mr.name = "last_value";
    mr.validation = evaluate_one_step(
        [](const std::vector<double>& w) { return w.back(); }, valid);
    mr.rollout = last_value_forecast(rollout_context, horizon);
    report.baselines.push_back(std::move(mr));
  }
  return report;
}

namespace {

nlohmann::ordered_json metrics_json(const ForecastMetrics& m) {
  return {{"mse", m.mse}, {"mae", m.mae}, {"directional_accuracy", m.directional_accuracy}};
}

nlohmann::ordered_json model_json(const ModelReport& m) {
  nlohmann::ordered_json j;
  j["name"] = m.name;
  j["validation"] = metrics_json(m.validation);
  j["final_train_loss"] = m.loss_trace.empty() ? nlohmann::ordered_json() : nlohmann::ordered_json(m.loss_trace.back());
  j["rollout"] = m.rollout;
  return j;
}

}  // namespace

std::string report_to_json(const CompareReport& report) {
  nlohmann::ordered_json j;
  j["config"] = {
      {"window", report.config.window},
      {"stride", report.config.stride},
      {"split_fraction", report.config.split_fraction},
      {"steps", report.config.steps},
      {"lr", report.config.lr},
      {"batch", report.config.batch},
      {"seed", report.config.seed},
      {"horizon", report.config.horizon},
      {"lstm_hidden", report.config.lstm_hidden},
      {"transformer",
       {{"d_model", report.config.transformer.d_model},
        {"heads", report.config.transformer.heads},
        {"d_k", report.config.transformer.d_k},
        {"d_v", report.config.transformer.d_v},
        {"d_ff", report.config.transformer.d_ff},
        {"n_layers", report.config.transformer.n_layers},
        {"mask_kind", to_string(report.config.transformer.mask_kind)},
        {"conv_k", report.config.transformer.conv_k}}},
  };
  j["models"] = nlohmann::ordered_json::array();
  for (const auto& m : report.models) j["models"].push_back(model_json(m));
  j["baselines"] = nlohmann::ordered_json::array();
  for (const auto& m : report.baselines) j["baselines"].push_back(model_json(m));
  j["rollout_actual"] = report.rollout_actual;
  return j.dump(2) + "\n";
}

void write_forecast_csv(const std::string& path, const std::vector<double>& actual,
                        const std::vector<double>& predicted) {
  if (actual.size() != predicted.size()) {
    throw UsageError("forecast csv: actual and predicted lengths differ");
  }
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("forecast csv: cannot open '" + path + "'");
  os << "index,actual,predicted\n";
  char buf[64];
  auto fmt = [&buf](double v) {
    const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw NumericError("forecast csv: could not format value");
    return std::string(buf, end);
  };
  for (std::size_t i = 0; i < actual.size(); ++i) {
    os << i << ',' << fmt(actual[i]) << ',' << fmt(predicted[i]) << '\n';
  }
  if (!os) throw DataError("forecast csv: write failed");
}

}  // namespace cfwb
