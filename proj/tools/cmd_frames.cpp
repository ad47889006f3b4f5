// Copyright (c) 2026 The cfwb Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include <json.hpp>

#include "cfwb/checkpoint.hpp"
#include "cfwb/train.hpp"
#include "cfwb/vq.hpp"
#include "cli_common.hpp"
#include "commands.hpp"

namespace cfwb::cli {

namespace {

struct ClipOptions {
  std::size_t t = 8;
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t sprites = 2;
  std::size_t sprite_size = 12;
  int speed_min = 1;
  int speed_max = 2;
  std::string stamps_dir;

  void add_options(OptionSet& opts) {
    opts.add_size("--t", t, "frames per clip");
    opts.add_size("--height", height, "frame height");
    opts.add_size("--width", width, "frame width");
    opts.add_size("--sprites", sprites, "sprites per clip");
    opts.add_size("--sprite-size", sprite_size, "sprite side length");
    opts.add_int("--speed-min", speed_min, "min per-axis speed");
    opts.add_int("--speed-max", speed_max, "max per-axis speed");
    opts.add_string("--stamps-dir", stamps_dir, "directory of P5 stamp bitmaps (optional)");
  }

  ClipConfig config() const {
    ClipConfig cfg;
    cfg.t = t;
    cfg.h = height;
    cfg.w = width;
    cfg.n_sprites = sprites;
    cfg.sprite_size = sprite_size;
    cfg.speed_min = speed_min;
    cfg.speed_max = speed_max;
    if (!stamps_dir.empty()) {
      std::vector<std::string> files;
      for (const auto& entry : std::filesystem::directory_iterator(stamps_dir)) {
        if (entry.path().extension() == ".pgm") files.push_back(entry.path().string());
      }
      std::sort(files.begin(), files.end());
      if (files.empty()) throw DataError("--stamps-dir: no .pgm files in '" + stamps_dir + "'");
      for (const auto& f : files) {
        std::size_t w = 0, h = 0;
        auto bitmap = load_pgm(f, w, h);
        if (w != sprite_size || h != sprite_size) {
          throw DataError("--stamps-dir: stamp '" + f + "' is " + std::to_string(w) + "x" +
                          std::to_string(h) + ", expected " + std::to_string(sprite_size) +
                          " square");
        }
        cfg.stamps.push_back(std::move(bitmap));
      }
    }
    return cfg;
  }
};

std::string clip_filename(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "clip_%05zu.mvc", index);
  return buf;
}

struct SynthClipsCmd {
  ClipOptions clip;
  std::size_t n_clips = 16;
  std::uint64_t seed = 0;
  std::size_t parallel = 1;
  std::string out_dir = "clips";
  std::string config;
  std::unique_ptr<OptionSet> opts;

  void run() const {
    std::filesystem::create_directories(out_dir);
    std::vector<VideoClip> clips = generate_clips(clip.config(), n_clips, seed, parallel);
    for (std::size_t i = 0; i < clips.size(); ++i) {
      save_clip(out_dir + "/" + clip_filename(i), clips[i]);
    }
    write_manifest(out_dir + "/manifest.txt", "synth-clips", *opts);
    std::cout << "wrote " << clips.size() << " clips to " << out_dir << "\n";
  }
};

constexpr const char* kPriorKind = "frame-prior";

struct TrainFramesCmd {
  ClipOptions clip;
  std::string clips_dir;
  std::size_t synth_clips = 0;
  std::uint64_t clip_seed = 0;
  std::size_t patch = 4;
  std::size_t codebook_size = 64;
  std::size_t vq_steps = 100;
  std::size_t steps = 2000;
  double lr = 1e-3;
  std::size_t batch = 1;
  std::uint64_t seed = 0;
  std::size_t d_model = 64;
  std::size_t heads = 4;
  std::size_t d_ff = 128;
  std::size_t layers = 2;
  std::string mask = "full";
  std::string out = "frame-prior.cfwb";
  std::string config;
  std::unique_ptr<OptionSet> opts;

  std::vector<VideoClip> load_clips() const {
    if (!clips_dir.empty()) {
      std::vector<std::string> files;
      for (const auto& entry : std::filesystem::directory_iterator(clips_dir)) {
        if (entry.path().extension() == ".mvc") files.push_back(entry.path().string());
      }
      std::sort(files.begin(), files.end());
      if (files.empty()) throw DataError("--clips: no .mvc files in '" + clips_dir + "'");
      std::vector<VideoClip> clips;
      clips.reserve(files.size());
      for (const auto& f : files) clips.push_back(load_clip(f));
      return clips;
    }
    if (synth_clips == 0) {
      throw UsageError("provide --clips or a synthetic corpus via --synth-clips");
    }
    return generate_clips(clip.config(), synth_clips, clip_seed);
  }

  void run() const {
    std::vector<VideoClip> clips = load_clips();
    const std::size_t frame_h = clips[0].h, frame_w = clips[0].w, clip_t = clips[0].t;
    for (const auto& c : clips) {
      if (c.h != frame_h || c.w != frame_w || c.t != clip_t) {
        throw DataError("train-frames: clips must share dimensions");
      }
    }

    // Codebook from the patch pool, then k-means style refinement.
    std::vector<std::vector<double>> patches;
    for (const auto& c : clips) {
      for (std::size_t f = 0; f < c.t; ++f) {
        auto ps = patchify(c.frame_data(f), frame_h, frame_w, patch);
        patches.insert(patches.end(), ps.begin(), ps.end());
      }
    }
    Rng init_rng = Rng(seed).substream("init");
    Codebook cb = codebook_from_samples(patches, codebook_size, init_rng);
    Rng vq_rng = Rng(seed).substream("vq");
    double vq_final = 0.0;
    for (std::size_t step = 0; step < vq_steps; ++step) {
      std::vector<std::vector<double>> batch_vecs;
      for (std::size_t i = 0; i < 256; ++i) {
        batch_vecs.push_back(patches[static_cast<std::size_t>(
            vq_rng.uniform_int(0, static_cast<std::int64_t>(patches.size()) - 1))]);
      }
      vq_final = vq_train_step(batch_vecs, cb, 0.25, 0.2).reconstruction;
    }

    // Tokenize every clip once.
    std::vector<std::vector<int>> token_seqs;
    token_seqs.reserve(clips.size());
    for (const auto& c : clips) token_seqs.push_back(tokenize_clip(c, patch, cb));

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
    cfg.vocab_size = codebook_size;
    cfg.max_len = token_seqs[0].size();
    cfg.seed = seed;
    GptModel model(cfg, Rng(seed).substream("model"));

    std::vector<Tensor> params = model.parameters();
    AdamConfig adam;
    adam.lr = lr;
    auto loss_fn = [&](std::size_t, Rng& rng) {
      Tensor acc = Tensor::scalar(0.0);
      for (std::size_t b = 0; b < std::max<std::size_t>(batch, 1); ++b) {
        const auto& tokens = token_seqs[static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<std::int64_t>(token_seqs.size()) - 1))];
        std::vector<int> input(tokens.begin(), tokens.end() - 1);
        std::vector<int> target(tokens.begin() + 1, tokens.end());
        acc = add(acc, cross_entropy_loss(model.forward(input), target));
      }
      return mul_scalar(acc, 1.0 / static_cast<double>(std::max<std::size_t>(batch, 1)));
    };
    TrainResult tr = train_loop(params, loss_fn, steps, adam, Rng(seed).substream("batch"));

    Checkpoint ckpt;
    ckpt.config = {{"kind", kPriorKind},
                   {"p", std::to_string(patch)},
                   {"frame_h", std::to_string(frame_h)},
                   {"frame_w", std::to_string(frame_w)},
                   {"clip_t", std::to_string(clip_t)}};
    for (const auto& [k, v] : cfg.to_kv()) ckpt.config[k] = v;
    ckpt.tensors.emplace_back(
        "vq.codebook", Tensor::from_data({cb.k, cb.dim}, cb.entries));
    for (auto& [name, tensor] : model.named_parameters()) ckpt.tensors.emplace_back(name, tensor);
    save_checkpoint(out, ckpt);

    nlohmann::ordered_json j;
    j["clips"] = clips.size();
    j["patch"] = patch;
    j["codebook_size"] = codebook_size;
    j["vq_final_reconstruction"] = vq_final;
    j["steps"] = steps;
    j["final_train_loss"] = tr.loss_trace.back();
    std::ofstream os(out + ".report.json", std::ios::trunc);
    os << j.dump(2) << "\n";
    write_manifest(out + ".manifest", "train-frames", *opts);
    std::cout << "final train loss " << tr.loss_trace.back() << ", checkpoint " << out << "\n";
  }
};

FramePrior load_prior(const std::string& path) {
  if (!std::filesystem::exists(path)) {
    throw DataError("--ckpt: file '" + path + "' does not exist");
  }
  Checkpoint ckpt = load_checkpoint(path);
  auto need = [&](const std::string& key) {
    auto it = ckpt.config.find(key);
    if (it == ckpt.config.end()) {
      throw FormatError("checkpoint '" + path + "': missing key '" + key + "'");
    }
    return it->second;
  };
  if (need("kind") != kPriorKind) {
    throw FormatError("checkpoint '" + path + "' is not a frame-prior checkpoint");
  }
  TransformerConfig cfg = TransformerConfig::from_kv(ckpt.config);
  if (ckpt.tensors.empty() || ckpt.tensors[0].first != "vq.codebook") {
    throw FormatError("checkpoint '" + path + "': first tensor must be vq.codebook");
  }
  const Tensor& table = ckpt.tensors[0].second;
  Codebook cb;
  cb.k = table.shape()[0];
  cb.dim = table.shape()[1];
  cb.entries = table.values();
  cb.usage_counts.assign(cb.k, 0);
  cb.validate();

  FramePrior prior{GptModel(cfg, Rng(cfg.seed)), std::move(cb), std::stoul(need("p")),
                   std::stoul(need("frame_h")), std::stoul(need("frame_w"))};
  std::vector<std::pair<std::string, Tensor>> gpt_tensors(ckpt.tensors.begin() + 1,
                                                          ckpt.tensors.end());
  prior.gpt.load_named_parameters(gpt_tensors);
  return prior;
}

struct PredictFramesCmd {
  std::string ckpt = "frame-prior.cfwb";
  std::string context;
  std::size_t condition = 4;
  std::size_t generate = 4;
  double temperature = 0.0;
  std::uint64_t seed = 0;
  std::string out_dir = "predicted";
  std::string config;
  std::unique_ptr<OptionSet> opts;

  void run() const {
    if (condition < 1) throw UsageError("--condition must be >= 1");
    if (generate < 1) throw UsageError("--generate must be >= 1");
    if (context.empty()) throw UsageError("--context: a context clip is required");
    if (!std::filesystem::exists(context)) {
      throw DataError("--context: file '" + context + "' does not exist");
    }
    FramePrior prior = load_prior(ckpt);
    VideoClip ctx = load_clip(context);
    VideoClip predicted =
        conditional_generate(prior, ctx, condition, generate, temperature, seed);

    std::filesystem::create_directories(out_dir);
    save_clip(out_dir + "/predicted.mvc", predicted);
    for (std::size_t f = 0; f < predicted.t; ++f) {
      char name[32];
      std::snprintf(name, sizeof(name), "frame_%03zu.pgm", f);
      write_frame_pgm(out_dir + "/" + name, predicted, f);
    }

    // Ground truth available when the context extends past the conditioning.
    if (ctx.t >= condition + generate) {
      VideoClip truth;
      truth.t = predicted.t;
      truth.h = ctx.h;
      truth.w = ctx.w;
      truth.pixels.assign(ctx.pixels.begin(),
                          ctx.pixels.begin() + predicted.t * ctx.h * ctx.w);
      FrameMetrics m = frame_metrics(predicted, truth, condition);
      nlohmann::ordered_json j;
      j["condition"] = condition;
      j["generate"] = generate;
      j["pixel_mse"] = m.pixel_mse;
      j["pixel_accuracy"] = m.pixel_accuracy;
      j["centroid_error"] = m.centroid_error;
      std::ofstream os(out_dir + "/metrics.json", std::ios::trunc);
      os << j.dump(2) << "\n";
      std::cout << "pixel accuracy " << m.pixel_accuracy << ", centroid error " << m.centroid_error
                << "\n";
    }
    write_manifest(out_dir + "/manifest.txt", "predict-frames", *opts);
    std::cout << "wrote " << out_dir << "/predicted.mvc (" << predicted.t << " frames)\n";
  }
};

}  // namespace

void register_synth_clips(CLI::App& app) {
  auto state = std::make_shared<SynthClipsCmd>();
  CLI::App* cmd = app.add_subcommand("synth-clips", "generate bouncing-sprite clips");
  state->opts = std::make_unique<OptionSet>(cmd);
  state->clip.add_options(*state->opts);
  state->opts->add_size("--n-clips", state->n_clips, "number of clips");
  state->opts->add_u64("--seed", state->seed, "base seed (clip i uses seed+i)");
  state->opts->add_size("--parallel", state->parallel, "worker threads");
  state->opts->add_string("--out-dir", state->out_dir, "output directory");
  add_config_option(cmd, state->config);
  cmd->callback([state] { state->run(); });
}

void register_train_frames(CLI::App& app) {
  auto state = std::make_shared<TrainFramesCmd>();
  CLI::App* cmd =
      app.add_subcommand("train-frames", "fit a codebook and GPT prior on tokenized clips");
  state->opts = std::make_unique<OptionSet>(cmd);
  state->clip.add_options(*state->opts);
  state->opts->add_string("--clips", state->clips_dir, "directory of .mvc clips");
  state->opts->add_size("--synth-clips", state->synth_clips, "synthesize this many clips instead");
  state->opts->add_u64("--clip-seed", state->clip_seed, "seed for synthetic clips");
  state->opts->add_size("--p", state->patch, "patch side length");
  state->opts->add_size("--codebook-size", state->codebook_size, "number of codes");
  state->opts->add_size("--vq-steps", state->vq_steps, "codebook refinement steps");
  state->opts->add_size("--steps", state->steps, "prior optimizer steps");
  state->opts->add_double("--lr", state->lr, "adam learning rate");
  state->opts->add_size("--batch", state->batch, "sequences per step");
  state->opts->add_u64("--seed", state->seed, "training seed");
  state->opts->add_size("--d-model", state->d_model, "model width");
  state->opts->add_size("--heads", state->heads, "attention heads");
  state->opts->add_size("--d-ff", state->d_ff, "feed-forward width");
  state->opts->add_size("--layers", state->layers, "decoder layers");
  state->opts->add_string("--mask", state->mask, "attention mask kind");
  state->opts->add_string("--out", state->out, "checkpoint path");
  add_config_option(cmd, state->config);
  cmd->callback([state] { state->run(); });
}

void register_predict_frames(CLI::App& app) {
  auto state = std::make_shared<PredictFramesCmd>();
  CLI::App* cmd =
      app.add_subcommand("predict-frames", "condition N frames, generate M more (N -> N+M)");
  state->opts = std::make_unique<OptionSet>(cmd);
  state->opts->add_string("--ckpt", state->ckpt, "frame-prior checkpoint");
  state->opts->add_string("--context", state->context, "context clip (.mvc)");
  state->opts->add_size("--condition", state->condition, "frames to condition on (N)");
  state->opts->add_size("--generate", state->generate, "frames to generate (M)");
  state->opts->add_double("--temperature", state->temperature, "sampling temperature (0 = argmax)");
  state->opts->add_u64("--seed", state->seed, "sampling seed");
  state->opts->add_string("--out-dir", state->out_dir, "output directory");
  add_config_option(cmd, state->config);
  cmd->callback([state] { state->run(); });
}

}  // namespace cfwb::cli
