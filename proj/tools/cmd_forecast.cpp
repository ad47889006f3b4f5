// Copyright (c) 2026 The cfwb Authors
// SPDX-License-Identifier: Apache-2.0

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include <json.hpp>

#include "cfwb/checkpoint.hpp"
#include "cfwb/harness.hpp"
#include "cfwb/svg.hpp"
#include "cli_common.hpp"
#include "commands.hpp"

namespace cfwb::cli {

namespace {

double parse_double(const std::string& text, const std::string& what) {
  double v = 0;
  const char* first = text.data();
  auto [p, ec] = std::from_chars(first, first + text.size(), v);
  if (ec != std::errc() || p != first + text.size()) {
    throw FormatError("checkpoint: bad " + what + " value '" + text + "'");
  }
  return v;
}

// Options shared by every command that reads or synthesizes a series.
struct SeriesSource {
  std::string data;  // CSV path; empty = synthesize
  std::string synth_kind = "sine";
  std::size_t synth_n = 0;
  double amplitude = 1.0;
  double period = 32.0;
  double trend = 0.0;
  double sigma = 0.0;
  std::uint64_t data_seed = 0;

  void add_options(OptionSet& opts) {
    opts.add_string("--data", data, "input CSV (date,close); omit to synthesize");
    opts.add_string("--synth-kind", synth_kind, "synthetic kind when no --data");
    opts.add_size("--synth-n", synth_n, "synthetic length when no --data");
    opts.add_double("--amplitude", amplitude, "synthetic amplitude");
    opts.add_double("--period", period, "synthetic period");
    opts.add_double("--trend", trend, "synthetic trend");
    opts.add_double("--sigma", sigma, "synthetic noise sigma");
    opts.add_u64("--data-seed", data_seed, "synthetic data seed");
  }

  Series load() const {
    if (!data.empty()) {
      if (!std::filesystem::exists(data)) {
        throw DataError("--data: file '" + data + "' does not exist");
      }
      return load_series(data);
    }
    if (synth_n == 0) {
      throw UsageError("provide --data or a synthetic series via --synth-n");
    }
    SynthParams p;
    p.amplitude = amplitude;
    p.period = period;
    p.trend = trend;
    p.sigma = sigma;
    return synth_series(synth_kind_from_string(synth_kind), p, synth_n, data_seed);
  }
};

struct ArchOptions {
  std::string arch = "decoder";
  std::size_t d_model = 32;
  std::size_t heads = 2;
  std::size_t d_ff = 64;
  std::size_t layers = 2;
  std::string mask = "full";
  std::size_t conv_k = 1;
  std::size_t lstm_hidden = 32;

  void add_options(OptionSet& opts) {
    opts.add_string("--arch", arch, "decoder | encdec | lstm");
    opts.add_size("--d-model", d_model, "model width");
    opts.add_size("--heads", heads, "attention heads");
    opts.add_size("--d-ff", d_ff, "feed-forward width");
    opts.add_size("--layers", layers, "decoder layers");
    opts.add_string("--mask", mask, "attention mask: full | strided | logsparse");
    opts.add_size("--conv-k", conv_k, "causal conv width for Q/K (1 = canonical)");
    opts.add_size("--lstm-hidden", lstm_hidden, "hidden size for --arch lstm");
  }

  TransformerConfig transformer(std::size_t window, std::uint64_t seed) const {
    TransformerConfig cfg;
    cfg.d_model = d_model;
    cfg.heads = heads;
    if (heads == 0 || d_model % heads != 0) {
      throw ConfigError("--d-model must be a positive multiple of --heads");
    }
    cfg.d_k = d_model / heads;
    cfg.d_v = d_model / heads;
    cfg.d_ff = d_ff;
    cfg.n_layers = layers;
    cfg.mask_kind = mask_kind_from_string(mask);
    cfg.conv_k = conv_k;
    cfg.input_dim = 1;
    cfg.max_len = window;
    cfg.seed = seed;
    return cfg;
  }
};

// A loaded forecaster of any architecture behind one prediction closure.
struct LoadedForecaster {
  StepPredictor step;
  std::size_t window = 0;
  WindowSet norm;  // carries mean/stddev only
};

constexpr const char* kCkptKind = "forecaster";

void save_forecaster_checkpoint(const std::string& path, const std::string& arch,
                                std::size_t window, const WindowSet& norm,
                                const std::map<std::string, std::string>& extra,
                                const std::vector<std::pair<std::string, Tensor>>& tensors) {
  Checkpoint ckpt;
  ckpt.config["kind"] = kCkptKind;
  ckpt.config["arch"] = arch;
  ckpt.config["window"] = std::to_string(window);
  ckpt.config["norm_mean"] = fmt_double(norm.mean);
  ckpt.config["norm_std"] = fmt_double(norm.stddev);
  for (const auto& [k, v] : extra) ckpt.config[k] = v;
  ckpt.tensors = tensors;
  save_checkpoint(path, ckpt);
}

LoadedForecaster load_forecaster(const std::string& path) {
  if (!std::filesystem::exists(path)) {
    throw DataError("--ckpt: file '" + path + "' does not exist");
  }
  Checkpoint ckpt = load_checkpoint(path);
  auto need = [&ckpt, &path](const std::string& key) {
    auto it = ckpt.config.find(key);
    if (it == ckpt.config.end()) {
      throw FormatError("checkpoint '" + path + "': missing key '" + key + "'");
    }
    return it->second;
  };
  if (need("kind") != kCkptKind) {
    throw FormatError("checkpoint '" + path + "' is not a forecaster checkpoint");
  }
  LoadedForecaster out;
  out.window = std::stoul(need("window"));
  out.norm.mean = parse_double(need("norm_mean"), "norm_mean");
  out.norm.stddev = parse_double(need("norm_std"), "norm_std");
  const std::string arch = need("arch");
  if (arch == "decoder") {
    TransformerConfig cfg = TransformerConfig::from_kv(ckpt.config);
    auto model = std::make_shared<TransformerForecaster>(cfg, Rng(cfg.seed));
    model->load_named_parameters(ckpt.tensors);
    out.step = [model](const std::vector<double>& w) {
      NoTape inference;
      return model->predict_next(w).item();
    };
  } else if (arch == "encdec") {
    TransformerConfig cfg = TransformerConfig::from_kv(ckpt.config);
    auto model = std::make_shared<EncDecForecaster>(cfg, Rng(cfg.seed));
    model->load_named_parameters(ckpt.tensors);
    out.step = [model](const std::vector<double>& w) {
      NoTape inference;
      return model->predict_next(w).item();
    };
  } else if (arch == "lstm") {
    auto model = std::make_shared<LstmForecaster>(std::stoul(need("lstm_hidden")), Rng(1));
    model->load_named_parameters(ckpt.tensors);
    out.step = [model](const std::vector<double>& w) {
      NoTape inference;
      return model->predict_next(w).item();
    };
  } else {
    throw FormatError("checkpoint '" + path + "': unknown arch '" + arch + "'");
  }
  return out;
}

struct TrainForecasterCmd {
  SeriesSource source;
  ArchOptions arch;
  std::size_t window = 64;
  std::size_t stride = 1;
  double split = 0.8;
  std::size_t steps = 500;
  double lr = 1e-3;
  std::size_t batch = 8;
  std::uint64_t seed = 0;
  std::string out = "forecaster.cfwb";
  std::string config;
  std::unique_ptr<OptionSet> opts;

  void run() const {
    Series series = source.load();
    auto [train, valid] = make_windows(series, window, 1, stride, split);

    ForecasterTrainResult result;
    if (arch.arch == "decoder") {
      TransformerConfig cfg = arch.transformer(window, seed);
      TransformerForecaster model(cfg, Rng(seed).substream("init"));
      result = train_forecaster(model, train, valid, steps, lr, batch, seed);
      save_forecaster_checkpoint(out, "decoder", window, train, cfg.to_kv(),
                                 model.named_parameters());
    } else if (arch.arch == "encdec") {
      TransformerConfig cfg = arch.transformer(window, seed);
      EncDecForecaster model(cfg, Rng(seed).substream("init"));
      result = train_forecaster(model, train, valid, steps, lr, batch, seed);
      save_forecaster_checkpoint(out, "encdec", window, train, cfg.to_kv(),
                                 model.named_parameters());
    } else if (arch.arch == "lstm") {
      LstmForecaster model(arch.lstm_hidden, Rng(seed).substream("init"));
      result = train_forecaster(model, train, valid, steps, lr, batch, seed);
      save_forecaster_checkpoint(out, "lstm", window, train,
                                 {{"lstm_hidden", std::to_string(arch.lstm_hidden)}},
                                 model.named_parameters());
    } else {
      throw UsageError("--arch must be decoder, encdec, or lstm");
    }

    nlohmann::ordered_json j;
    j["arch"] = arch.arch;
    j["window"] = window;
    j["steps"] = steps;
    j["seed"] = seed;
    j["final_train_loss"] = result.loss_trace.back();
    j["validation"] = {{"mse", result.validation.mse},
                       {"mae", result.validation.mae},
                       {"directional_accuracy", result.validation.directional_accuracy}};
    std::ofstream os(out + ".report.json", std::ios::trunc);
    os << j.dump(2) << "\n";

    write_manifest(out + ".manifest", "train-forecaster", *opts);
    std::cout << "validation mse " << result.validation.mse << ", checkpoint " << out << "\n";
  }
};

struct ForecastCmd {
  std::string ckpt = "forecaster.cfwb";
  std::string data;
  std::size_t horizon = 8;
  std::string out = "forecast.csv";
  std::string svg;
  std::string config;
  std::unique_ptr<OptionSet> opts;

  void run() const {
    if (data.empty()) throw UsageError("--data: input series is required");
    if (!std::filesystem::exists(data)) {
      throw DataError("--data: file '" + data + "' does not exist");
    }
    if (horizon < 1) throw UsageError("--horizon must be >= 1");
    Series series = load_series(data);
    LoadedForecaster model = load_forecaster(ckpt);
    if (series.size() < model.window + horizon) {
      throw UsageError("series too short: need " + std::to_string(model.window + horizon) +
                       " points");
    }
    // Hold out the final `horizon` points and predict them from the window
    // immediately before.
    const std::size_t cut = series.size() - horizon;
    std::vector<double> context(series.values.begin() + (cut - model.window),
                                series.values.begin() + cut);
    std::vector<double> actual(series.values.begin() + cut, series.values.end());
    std::vector<double> predicted = forecast_rollout(model.step, context, horizon, model.norm);

    write_forecast_csv(out, actual, predicted);
    const std::string svg_path = svg.empty() ? out + ".svg" : svg;
    write_forecast_svg(svg_path, actual, predicted, "forecast horizon " + std::to_string(horizon));
    write_manifest(out + ".manifest", "forecast", *opts);
    std::cout << "wrote " << out << " and " << svg_path << "\n";
  }
};

struct CompareCmd {
  SeriesSource source;
  std::size_t window = 64;
  std::size_t stride = 1;
  double split = 0.8;
  std::size_t steps = 2000;
  double lr = 1e-3;
  std::size_t batch = 8;
  std::uint64_t seed = 0;
  std::size_t horizon = 8;
  std::size_t lstm_hidden = 32;
  std::size_t d_model = 32;
  std::size_t heads = 2;
  std::size_t d_ff = 64;
  std::size_t layers = 2;
  std::string mask = "full";
  std::string out = "compare.json";
  std::string config;
  std::unique_ptr<OptionSet> opts;

  void run() const {
    Series series = source.load();
    CompareConfig cfg;
    cfg.window = window;
    cfg.stride = stride;
    cfg.split_fraction = split;
    cfg.steps = steps;
    cfg.lr = lr;
    cfg.batch = batch;
    cfg.seed = seed;
    cfg.horizon = horizon;
    cfg.lstm_hidden = lstm_hidden;
    cfg.transformer.d_model = d_model;
    cfg.transformer.heads = heads;
    if (heads == 0 || d_model % heads != 0) {
      throw ConfigError("--d-model must be a positive multiple of --heads");
    }
    cfg.transformer.d_k = d_model / heads;
    cfg.transformer.d_v = d_model / heads;
    cfg.transformer.d_ff = d_ff;
    cfg.transformer.n_layers = layers;
    cfg.transformer.mask_kind = mask_kind_from_string(mask);
    cfg.transformer.max_len = window;

    CompareReport report = compare_experiment(series, cfg);
    std::ofstream os(out, std::ios::trunc);
    if (!os) throw DataError("compare: cannot open '" + out + "'");
    os << report_to_json(report);
    os.close();

    for (const auto& m : report.models) {
      write_forecast_svg(out + "." + m.name + ".svg", report.rollout_actual, m.rollout,
                         m.name + " rollout");
    }
    write_manifest(out + ".manifest", "compare", *opts);

    for (const auto& m : report.models) {
      std::cout << m.name << ": validation mse " << m.validation.mse << "\n";
    }
    for (const auto& b : report.baselines) {
      std::cout << b.name << ": validation mse " << b.validation.mse << "\n";
    }
  }
};

}  // namespace

void register_train_forecaster(CLI::App& app) {
  auto state = std::make_shared<TrainForecasterCmd>();
  CLI::App* cmd = app.add_subcommand("train-forecaster", "train a next-value forecaster");
  state->opts = std::make_unique<OptionSet>(cmd);
  state->source.add_options(*state->opts);
  state->arch.add_options(*state->opts);
  state->opts->add_size("--window", state->window, "input window length");
  state->opts->add_size("--stride", state->stride, "window stride");
  state->opts->add_double("--split", state->split, "train fraction");
  state->opts->add_size("--steps", state->steps, "optimizer steps");
  state->opts->add_double("--lr", state->lr, "adam learning rate");
  state->opts->add_size("--batch", state->batch, "windows per step");
  state->opts->add_u64("--seed", state->seed, "training seed");
  state->opts->add_string("--out", state->out, "checkpoint path");
  add_config_option(cmd, state->config);
  cmd->callback([state] { state->run(); });
}

void register_forecast(CLI::App& app) {
  auto state = std::make_shared<ForecastCmd>();
  CLI::App* cmd = app.add_subcommand("forecast", "autoregressive rollout from a checkpoint");
  state->opts = std::make_unique<OptionSet>(cmd);
  state->opts->add_string("--ckpt", state->ckpt, "forecaster checkpoint");
  state->opts->add_string("--data", state->data, "input CSV (date,close)");
  state->opts->add_size("--horizon", state->horizon, "steps to predict");
  state->opts->add_string("--out", state->out, "output CSV path");
  state->opts->add_string("--svg", state->svg, "plot path (default <out>.svg)");
  add_config_option(cmd, state->config);
  cmd->callback([state] { state->run(); });
}

void register_compare(CLI::App& app) {
  auto state = std::make_shared<CompareCmd>();
  CLI::App* cmd =
      app.add_subcommand("compare", "transformer vs LSTM on one series, equal budgets");
  state->opts = std::make_unique<OptionSet>(cmd);
  state->source.add_options(*state->opts);
  state->opts->add_size("--window", state->window, "input window length");
  state->opts->add_size("--stride", state->stride, "window stride");
  state->opts->add_double("--split", state->split, "train fraction");
  state->opts->add_size("--steps", state->steps, "optimizer steps per model");
  state->opts->add_double("--lr", state->lr, "adam learning rate");
  state->opts->add_size("--batch", state->batch, "windows per step");
  state->opts->add_u64("--seed", state->seed, "model seed");
  state->opts->add_size("--horizon", state->horizon, "rollout length for the plot");
  state->opts->add_size("--lstm-hidden", state->lstm_hidden, "LSTM hidden size");
  state->opts->add_size("--d-model", state->d_model, "transformer width");
  state->opts->add_size("--heads", state->heads, "attention heads");
  state->opts->add_size("--d-ff", state->d_ff, "feed-forward width");
  state->opts->add_size("--layers", state->layers, "transformer layers");
  state->opts->add_string("--mask", state->mask, "attention mask kind");
  state->opts->add_string("--out", state->out, "report JSON path");
  add_config_option(cmd, state->config);
  cmd->callback([state] { state->run(); });
}

}  // namespace cfwb::cli
