// Copyright (c) 2026 The cfwb Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cfwb/lstm.hpp"
#include "cfwb/model.hpp"
#include "cfwb/series.hpp"

namespace cfwb {

// Supervised windows with train-only z-score normalization applied to both
// inputs and targets. `mean`/`stddev` are fitted on the training inputs.
struct WindowSet {
  std::vector<std::vector<double>> inputs;   // each length L_in, normalized
  std::vector<std::vector<double>> targets;  // each length L_out, normalized
  double mean = 0.0;
  double stddev = 1.0;

  double denormalize(double v) const { return v * stddev + mean; }
  double normalize(double v) const { return (v - mean) / stddev; }
};

// Contiguous windows of length L_in + L_out at the given stride. A window
// belongs to train iff it ends strictly before the split index
// floor(split_fraction * n) and to validation iff it starts at or after it;
// windows spanning the boundary are dropped.
std::pair<WindowSet, WindowSet> make_windows(const Series& series, std::size_t l_in,
                                             std::size_t l_out, std::size_t stride,
                                             double split_fraction);

struct ForecastMetrics {
  double mse = 0.0;
  double mae = 0.0;
  double directional_accuracy = 0.0;
};

// directional_accuracy compares the signs of consecutive deltas; a zero delta
// matches only a zero delta.
ForecastMetrics forecast_metrics(const std::vector<double>& predicted,
                                 const std::vector<double>& actual);

// Repeats the final context value over the horizon.
std::vector<double> last_value_forecast(const std::vector<double>& context, std::size_t horizon);
// Repeats the final period of the context.
std::vector<double> seasonal_naive_forecast(const std::vector<double>& context,
                                            std::size_t horizon, std::size_t period);

// One-step predictor over a normalized window; implementations wrap the
// transformer / LSTM forecasters.
using StepPredictor = std::function<double(const std::vector<double>& normalized_window)>;

// Autoregressive rollout: each prediction is appended to the context for the
// next step. Context is raw-scale; outputs are de-normalized back to raw.
std::vector<double> forecast_rollout(const StepPredictor& step, std::vector<double> context_raw,
                                     std::size_t horizon, const WindowSet& norm);

struct CompareConfig {
  std::size_t window = 64;
  std::size_t stride = 1;
  double split_fraction = 0.8;
  std::size_t steps = 2000;
  double lr = 1e-3;
  std::size_t batch = 8;
  std::uint64_t seed = 0;
  std::size_t horizon = 8;
  std::size_t lstm_hidden = 32;
  TransformerConfig transformer;  // sizes + mask kind; max_len adjusted to window
};

struct ModelReport {
  std::string name;
  ForecastMetrics validation;      // one-step-ahead over the validation windows
  std::vector<double> loss_trace;  // empty for baselines
  std::vector<double> rollout;     // raw scale, `horizon` entries
};

struct CompareReport {
  CompareConfig config;
  std::vector<ModelReport> models;     // transformer, lstm
  std::vector<ModelReport> baselines;  // last_value (always)
  std::vector<double> rollout_actual;  // ground truth for the rollout segment
};

// Trains the transformer and LSTM forecasters on identical windows with an
// identical optimizer budget and evaluates both plus the last-value baseline.
CompareReport compare_experiment(const Series& series, const CompareConfig& cfg);

// Ordered, schema-stable JSON rendering of the report.
std::string report_to_json(const CompareReport& report);

// `index,actual,predicted` rows, one per step.
void write_forecast_csv(const std::string& path, const std::vector<double>& actual,
                        const std::vector<double>& predicted);

// Trains just the transformer forecaster; shared by the CLI train command.
struct ForecasterTrainResult {
  ForecastMetrics validation;
  std::vector<double> loss_trace;
};
ForecasterTrainResult train_forecaster(TransformerForecaster& model, const WindowSet& train,
                                       const WindowSet& valid, std::size_t steps, double lr,
                                       std::size_t batch, std::uint64_t seed);
ForecasterTrainResult train_forecaster(LstmForecaster& model, const WindowSet& train,
                                       const WindowSet& valid, std::size_t steps, double lr,
                                       std::size_t batch, std::uint64_t seed);
ForecasterTrainResult train_forecaster(EncDecForecaster& model, const WindowSet& train,
                                       const WindowSet& valid, std::size_t steps, double lr,
                                       std::size_t batch, std::uint64_t seed);

// One-step validation metrics for an arbitrary predictor (raw scale).
ForecastMetrics evaluate_one_step(const StepPredictor& step, const WindowSet& valid);

}  // namespace cfwb
