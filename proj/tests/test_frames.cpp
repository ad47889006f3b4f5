#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "cfwb/frames.hpp"
#include "cfwb/vq.hpp"

using namespace cfwb;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

ClipConfig small_cfg() {
  ClipConfig cfg;
  cfg.n_sprites = 1;
  cfg.t = 8;
  cfg.h = 16;
  cfg.w = 16;
  cfg.sprite_size = 4;
  cfg.speed_min = 1;
  cfg.speed_max = 1;
  return cfg;
}

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("generator: constant velocity advances one pixel per frame") {
  // Find a seeded clip whose sprite moves straight right without bouncing.
  ClipConfig cfg = small_cfg();
  cfg.t = 6;
  bool found = false;
  for (std::uint64_t seed = 0; seed < 200 && !found; ++seed) {
    VideoClip clip = generate_clip(cfg, seed);
    const auto& tr = clip.tracks[0];
    if (tr[0].vx == 1 && tr[0].x + static_cast<int>(cfg.t) <= static_cast<int>(cfg.w - cfg.sprite_size) &&
        tr[0].y + static_cast<int>(cfg.t) <= static_cast<int>(cfg.h - cfg.sprite_size) && tr[0].vy == 1) {
      found = true;
      for (std::size_t f = 1; f < cfg.t; ++f) {
        CHECK(tr[f].x == tr[0].x + static_cast<int>(f));
        CHECK(tr[f].vx == 1);
      }
    }
  }
  CHECK(found);
}

TEST_CASE("generator: wall reflection flips the offending component only") {
  ClipConfig cfg = small_cfg();
  cfg.t = 40;
  VideoClip clip = generate_clip(cfg, 3);
  const int max_x = static_cast<int>(cfg.w - cfg.sprite_size);
  const int max_y = static_cast<int>(cfg.h - cfg.sprite_size);
  bool saw_bounce = false;
  for (std::size_t f = 1; f < cfg.t; ++f) {
    const auto& prev = clip.tracks[0][f - 1];
    const auto& cur = clip.tracks[0][f];
    // Speed magnitude conserved per axis, every frame.
    CHECK(std::abs(cur.vx) == std::abs(prev.vx));
    CHECK(std::abs(cur.vy) == std::abs(prev.vy));
    // Position bounds.
    CHECK(cur.x >= 0);
    CHECK(cur.x <= max_x);
    CHECK(cur.y >= 0);
    CHECK(cur.y <= max_y);
    if (cur.vx != prev.vx) {
      saw_bounce = true;
      // Mirrored position: prev.x + prev.vx reflected about the wall.
      const int raw = prev.x + prev.vx;
      const int expect = raw < 0 ? -raw : 2 * max_x - raw;
      CHECK(cur.x == expect);
    }
  }
  CHECK(saw_bounce);

  // Sprite centers stay inside the box.
  for (std::size_t f = 0; f < cfg.t; ++f) {
    const auto& tr = clip.tracks[0][f];
    const double cx = tr.x + cfg.sprite_size / 2.0;
    const double cy = tr.y + cfg.sprite_size / 2.0;
    CHECK(cx >= 0.0);
    CHECK(cx < static_cast<double>(cfg.w));
    CHECK(cy >= 0.0);
    CHECK(cy < static_cast<double>(cfg.h));
  }
}

TEST_CASE("generator: time reversal returns to the start when no wall is hit") {
  ClipConfig cfg = small_cfg();
  cfg.t = 4;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    VideoClip clip = generate_clip(cfg, seed);
    const auto& tr = clip.tracks[0];
    bool bounced = false;
    for (std::size_t f = 1; f < cfg.t; ++f) {
      bounced |= tr[f].vx != tr[0].vx || tr[f].vy != tr[0].vy;
    }
    if (bounced) continue;
    // Integrate backwards from the final state.
    int x = tr.back().x, y = tr.back().y;
    for (std::size_t f = 0; f + 1 < cfg.t; ++f) {
      x -= tr[0].vx;
      y -= tr[0].vy;
    }
    CHECK(x == tr[0].x);
    CHECK(y == tr[0].y);
  }
}

TEST_CASE("generator: collision flags reflect bounding-box overlap") {
  ClipConfig cfg = small_cfg();
  cfg.n_sprites = 2;
  cfg.t = 30;
  cfg.speed_max = 2;
  bool saw_overlap = false, saw_clear = false;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    VideoClip clip = generate_clip(cfg, seed);
    for (std::size_t f = 0; f < cfg.t; ++f) {
      const auto& a = clip.tracks[0][f];
      const auto& b = clip.tracks[1][f];
      const int s = static_cast<int>(cfg.sprite_size);
      const bool overlap = a.x < b.x + s && b.x < a.x + s && a.y < b.y + s && b.y < a.y + s;
      CHECK((clip.collision_flags[f] != 0) == overlap);
      saw_overlap |= overlap;
      saw_clear |= !overlap;
    }
  }
  CHECK(saw_overlap);
  CHECK(saw_clear);
}

TEST_CASE("generator: sprite larger than the box is rejected") {
  ClipConfig cfg = small_cfg();
  cfg.sprite_size = 16;
  CHECK_THROWS_AS(generate_clip(cfg, 0), ConfigError);
}

TEST_CASE("generator supports the 64x64 two-sprite setting") {
  ClipConfig cfg;
  cfg.n_sprites = 2;
  cfg.t = 16;
  cfg.h = 64;
  cfg.w = 64;
  cfg.sprite_size = 12;
  VideoClip clip = generate_clip(cfg, 11);
  CHECK(clip.h == 64);
  CHECK(clip.w == 64);
  CHECK(clip.tracks.size() == 2);
  std::size_t lit = 0;
  for (std::uint8_t p : clip.pixels) lit += p > 0;
  CHECK(lit > 0);
}

TEST_CASE("generator determinism and parallel generation merge order") {
  ClipConfig cfg = small_cfg();
  auto a = generate_clips(cfg, 6, 42, 1);
  auto b = generate_clips(cfg, 6, 42, 3);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].pixels == b[i].pixels);
    CHECK(a[i].collision_flags == b[i].collision_flags);
  }
  // seed_i = seed + i: a shifted batch shares all but the first clip.
  auto c = generate_clips(cfg, 6, 43, 1);
  for (std::size_t i = 0; i + 1 < a.size(); ++i) CHECK(c[i].pixels == a[i + 1].pixels);
}

TEST_CASE("clip save/load round trip is bit-exact") {
  ClipConfig cfg = small_cfg();
  cfg.n_sprites = 2;
  VideoClip clip = generate_clip(cfg, 9);
  const auto path = temp_file("cfwb_clip.mvc");
  save_clip(path.string(), clip);

  VideoClip back = load_clip(path.string());
  CHECK(back.t == clip.t);
  CHECK(back.h == clip.h);
  CHECK(back.w == clip.w);
  CHECK(back.pixels == clip.pixels);
  CHECK(back.collision_flags == clip.collision_flags);
  REQUIRE(back.tracks.size() == clip.tracks.size());
  for (std::size_t s = 0; s < clip.tracks.size(); ++s) {
    for (std::size_t f = 0; f < clip.t; ++f) {
      CHECK(back.tracks[s][f].x == clip.tracks[s][f].x);
      CHECK(back.tracks[s][f].vy == clip.tracks[s][f].vy);
    }
  }

  // Saving the loaded clip reproduces both files byte for byte.
  const auto path2 = temp_file("cfwb_clip2.mvc");
  save_clip(path2.string(), back);
  CHECK(read_bytes(path) == read_bytes(path2));
  CHECK(read_bytes(path.string() + ".labels.json") == read_bytes(path2.string() + ".labels.json"));
  for (const auto& p : {path, path2}) {
    std::filesystem::remove(p);
    std::filesystem::remove(p.string() + ".labels.json");
  }
}

TEST_CASE("pgm export writes a valid P5 header") {
  VideoClip clip = generate_clip(small_cfg(), 1);
  const auto path = temp_file("cfwb_frame.pgm");
  write_frame_pgm(path.string(), clip, 0);
  std::string bytes = read_bytes(path);
  CHECK(bytes.substr(0, 3) == "P5\n");
  CHECK(bytes.size() == std::string("P5\n16 16\n255\n").size() + 256);

  std::size_t w = 0, h = 0;
  auto data = load_pgm(path.string(), w, h);
  CHECK(w == 16);
  CHECK(h == 16);
  CHECK(std::equal(data.begin(), data.end(), clip.frame_data(0)));
  std::filesystem::remove(path);
}

TEST_CASE("patchify: degenerate tiling, round trip, counting") {
  VideoClip clip = generate_clip(small_cfg(), 2);
  // p = H = W: a single patch equal to the flattened frame.
  auto whole = patchify(clip.frame_data(0), 16, 16, 16);
  REQUIRE(whole.size() == 1);
  for (std::size_t i = 0; i < 256; ++i)
    CHECK(whole[0][i] == static_cast<double>(clip.frame_data(0)[i]));

  // Round trip is lossless for every p that divides the frame.
  for (std::size_t p : {2UL, 4UL, 8UL}) {
    auto patches = patchify(clip.frame_data(0), 16, 16, p);
    CHECK(patches.size() == (16 / p) * (16 / p));
    std::vector<std::uint8_t> back(256);
    unpatchify(patches, 16, 16, p, back.data());
    CHECK(std::equal(back.begin(), back.end(), clip.frame_data(0)));
  }

  // 64x64 with p=8: 64 patches of length 64.
  ClipConfig big;
  big.t = 1;
  big.h = 64;
  big.w = 64;
  big.sprite_size = 8;
  big.n_sprites = 1;
  VideoClip bc = generate_clip(big, 3);
  auto patches = patchify(bc.frame_data(0), 64, 64, 8);
  CHECK(patches.size() == 64);
  CHECK(patches[0].size() == 64);

  CHECK_THROWS_AS(patchify(clip.frame_data(0), 16, 16, 5), ConfigError);
}

TEST_CASE("vq encode: identity, tie break, brute-force oracle") {
  Codebook cb;
  cb.k = 8;
  cb.dim = 3;
  Rng rng(4);
  cb.entries.resize(24);
  for (double& v : cb.entries) v = rng.uniform(-1, 1);
  cb.usage_counts.assign(8, 0);

  // A vector equal to entry 3 encodes to 3.
  std::vector<double> e3(cb.entry(3), cb.entry(3) + 3);
  CHECK(vq_encode_one(e3, cb) == 3);

  // Equidistant from entries 1 and 4: lowest index wins.
  Codebook tie;
  tie.k = 6;
  tie.dim = 1;
  tie.entries = {9, -1, 9, 9, 1, 9};
  tie.usage_counts.assign(6, 0);
  CHECK(vq_encode_one({0.0}, tie) == 1);

  // Brute force oracle over 1000 random vectors.
  auto brute = [&cb](const std::vector<double>& v) {
    std::size_t best = 0;
    double best_d = 1e300;
    for (std::size_t i = 0; i < cb.k; ++i) {
      double d = 0;
      for (std::size_t j = 0; j < cb.dim; ++j)
        d += (v[j] - cb.entry(i)[j]) * (v[j] - cb.entry(i)[j]);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    return best;
  };
  std::vector<std::vector<double>> vecs;
  for (int i = 0; i < 1000; ++i) {
    vecs.push_back({rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)});
  }
  auto indices = vq_encode(vecs, cb);
  for (std::size_t i = 0; i < vecs.size(); ++i) CHECK(indices[i] == brute(vecs[i]));
  std::size_t used = 0;
  for (std::size_t c : cb.usage_counts) used += c;
  CHECK(used == 1000);

  CHECK_THROWS_AS(vq_encode_one({1.0}, cb), ShapeError);
}

TEST_CASE("vq decode: lookup, bounds, determinism") {
  Codebook cb;
  cb.k = 8;
  cb.dim = 2;
  for (int i = 0; i < 16; ++i) cb.entries.push_back(i);
  cb.usage_counts.assign(8, 0);

  auto out = vq_decode({0, 3, 3}, cb);
  CHECK(out[0] == std::vector<double>{0, 1});
  CHECK(out[1] == std::vector<double>{6, 7});
  CHECK(out[1] == out[2]);

  CHECK_THROWS_AS(vq_decode({9}, cb), DataError);

  // Encode(decode(entries)) is the identity on the codebook.
  std::vector<std::vector<double>> entries;
  for (std::size_t i = 0; i < cb.k; ++i)
    entries.emplace_back(cb.entry(i), cb.entry(i) + cb.dim);
  auto idx = vq_encode(entries, cb);
  for (std::size_t i = 0; i < cb.k; ++i) CHECK(idx[i] == i);
}

TEST_CASE("vq train step: fixed point and cluster separation") {
  Codebook cb;
  cb.k = 2;
  cb.dim = 2;
  cb.entries = {0, 0, 5, 5};
  cb.usage_counts.assign(2, 0);

  // Batch equal to the codebook: all three losses exactly zero, no movement.
  VqLosses at_fixed = vq_train_step({{0, 0}, {5, 5}}, cb, 0.25);
  CHECK(at_fixed.reconstruction == 0.0);
  CHECK(at_fixed.codebook == 0.0);
  CHECK(at_fixed.commitment == 0.0);
  CHECK(cb.entries == std::vector<double>{0, 0, 5, 5});

  CHECK_THROWS_AS(vq_train_step({}, cb), UsageError);

  // Two synthetic clusters, K=2: after 500 steps each cluster has its own code.
  Codebook learn;
  learn.k = 2;
  learn.dim = 2;
  learn.entries = {0.1, 0.1, 0.2, 0.2};  // both codes start near cluster A
  learn.usage_counts.assign(2, 0);
  Rng rng(5);
  for (int step = 0; step < 500; ++step) {
    std::vector<std::vector<double>> batch;
    for (int i = 0; i < 8; ++i) {
      const bool cluster_b = rng.uniform() < 0.5;
      const double cx = cluster_b ? 4.0 : 0.0;
      batch.push_back({cx + 0.1 * rng.normal(), cx + 0.1 * rng.normal()});
    }
    vq_train_step(batch, learn, 0.25, 0.2);
  }
  const std::size_t code_a = vq_encode_one({0.0, 0.0}, learn);
  const std::size_t code_b = vq_encode_one({4.0, 4.0}, learn);
  CHECK(code_a != code_b);
  // Final reconstruction error is near the intra-cluster noise floor.
  VqLosses final_losses = vq_train_step({{0, 0}, {4, 4}}, learn, 0.25, 0.0);
  CHECK(final_losses.reconstruction < 0.1);
}

TEST_CASE("straight-through estimator copies gradients exactly") {
  Codebook cb;
  cb.k = 4;
  cb.dim = 2;
  cb.entries = {0, 0, 1, 1, 2, 2, 3, 3};
  cb.usage_counts.assign(4, 0);

  Tensor x = Tensor::from_data({3, 2}, {0.2, 0.1, 1.9, 2.2, 2.6, 3.1}, true);
  Tensor target = Tensor::zeros({3, 2});
  Tensor q;
  {
    Tape tape;
    q = quantize_st(x, cb);
    Tensor loss = mse_loss(q, target);
    tape.backward(loss);
  }
  // Forward snapped to nearest entries.
  CHECK(q.at(0, 0) == 0.0);
  CHECK(q.at(1, 0) == 2.0);
  CHECK(q.at(2, 0) == 3.0);
  // d(loss)/dx equals d(loss)/dq entry for entry.
  REQUIRE(q.has_grad());
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(x.grad()[i] == q.grad()[i]);
}

TEST_CASE("codebook init picks distinct samples and pads when K exceeds them") {
  std::vector<std::vector<double>> samples;
  for (int i = 0; i < 20; ++i) samples.push_back({static_cast<double>(i % 5), 1.0});
  Rng rng(6);
  Codebook cb = codebook_from_samples(samples, 5, rng);
  cb.validate();
  // All 5 distinct values present exactly once.
  std::set<double> firsts;
  for (std::size_t i = 0; i < cb.k; ++i) firsts.insert(cb.entry(i)[0]);
  CHECK(firsts.size() == 5);

  // K beyond the distinct pool: padded with jittered copies, all distinct,
  // and every real sample still encodes to an exact (distance 0) entry.
  Codebook padded = codebook_from_samples(samples, 8, rng);
  padded.validate();
  std::set<std::vector<double>> rows;
  for (std::size_t i = 0; i < padded.k; ++i)
    rows.insert(std::vector<double>(padded.entry(i), padded.entry(i) + padded.dim));
  CHECK(rows.size() == 8);
  for (const auto& s : samples) {
    const std::size_t idx = vq_encode_one(s, padded);
    double d = 0;
    for (std::size_t j = 0; j < padded.dim; ++j)
      d += (s[j] - padded.entry(idx)[j]) * (s[j] - padded.entry(idx)[j]);
    CHECK(d == 0.0);
  }
}

TEST_CASE("tokenize: counting, bounds, reconstruction with a covering codebook") {
  ClipConfig cfg;
  cfg.t = 4;
  cfg.h = 64;
  cfg.w = 64;
  cfg.sprite_size = 12;
  cfg.n_sprites = 2;
  VideoClip clip = generate_clip(cfg, 7);

  // Codebook covering every distinct patch in the clip.
  std::vector<std::vector<double>> all_patches;
  for (std::size_t f = 0; f < clip.t; ++f) {
    auto ps = patchify(clip.frame_data(f), 64, 64, 16);
    all_patches.insert(all_patches.end(), ps.begin(), ps.end());
  }
  std::set<std::vector<double>> distinct(all_patches.begin(), all_patches.end());
  Rng rng(8);
  Codebook cb = codebook_from_samples(all_patches, distinct.size(), rng);

  std::vector<int> tokens = tokenize_clip(clip, 16, cb);
  CHECK(tokens.size() == 4 * 16);  // T * (64/16)^2
  for (int t : tokens) {
    CHECK(t >= 0);
    CHECK(t < static_cast<int>(cb.k));
  }

  // With every patch in the codebook, detokenize reproduces the clip exactly.
  VideoClip back = detokenize_tokens(tokens, clip.t, 64, 64, 16, cb);
  CHECK(back.pixels == clip.pixels);
}

TEST_CASE("frame metrics: identity, all-black baseline, centroid discretization") {
  ClipConfig cfg = small_cfg();
  VideoClip clip = generate_clip(cfg, 10);
  FrameMetrics same = frame_metrics(clip, clip, 0);
  CHECK(same.pixel_mse == 0.0);
  CHECK(same.pixel_accuracy == 1.0);
  CHECK(same.centroid_error == 0.0);

  // All-black prediction vs one 4x4 sprite: accuracy = 1 - 16/256.
  VideoClip black = clip;
  std::fill(black.pixels.begin(), black.pixels.end(), 0);
  FrameMetrics vs_black = frame_metrics(black, clip, 0);
  CHECK(vs_black.pixel_accuracy == doctest::Approx(1.0 - 16.0 / 256.0).epsilon(1e-12));

  // Mass centroid of a solid square sits at its center up to 0.5 px.
  const auto& tr = clip.tracks[0][0];
  double cx = 0, cy = 0, mass = 0;
  for (std::size_t r = 0; r < 16; ++r)
    for (std::size_t c = 0; c < 16; ++c) {
      const double v = clip.pixel(0, r, c);
      cx += v * c;
      cy += v * r;
      mass += v;
    }
  cx /= mass;
  cy /= mass;
  CHECK(std::abs(cx - (tr.x + 2.0)) <= 0.5);
  CHECK(std::abs(cy - (tr.y + 2.0)) <= 0.5);

  VideoClip wrong = clip;
  wrong.h = 8;
  wrong.pixels.resize(wrong.t * 8 * wrong.w);
  CHECK_THROWS_AS(frame_metrics(wrong, clip, 0), UsageError);
}

TEST_CASE("conditional generation: copy contract, token counts, determinism") {
  // Train-free smoke: an untrained prior still honors the structural contract.
  ClipConfig cfg = small_cfg();
  std::vector<VideoClip> clips = generate_clips(cfg, 24, 100);

  std::vector<std::vector<double>> patches;
  for (const auto& c : clips)
    for (std::size_t f = 0; f < c.t; ++f) {
      auto ps = patchify(c.frame_data(f), 16, 16, 4);
      patches.insert(patches.end(), ps.begin(), ps.end());
    }
  Rng rng(11);
  Codebook cb = codebook_from_samples(patches, 32, rng);

  TransformerConfig mc;
  mc.d_model = 16;
  mc.heads = 2;
  mc.d_k = 8;
  mc.d_v = 8;
  mc.d_ff = 32;
  mc.n_layers = 1;
  mc.vocab_size = 32;
  mc.max_len = 8 * 16;
  FramePrior prior{GptModel(mc, Rng(12)), cb, 4, 16, 16};
  CHECK(prior.tokens_per_frame() == 16);

  VideoClip out = conditional_generate(prior, clips[0], 2, 2, 0.0, 5);
  CHECK(out.t == 4);
  // Conditioning frames are bit-identical to the context.
  CHECK(std::equal(out.pixels.begin(), out.pixels.begin() + 2 * 256, clips[0].pixels.begin()));

  VideoClip again = conditional_generate(prior, clips[0], 2, 2, 0.0, 99);
  CHECK(out.pixels == again.pixels);  // temperature 0 ignores the sampling seed

  VideoClip sampled = conditional_generate(prior, clips[0], 2, 2, 1.0, 5);
  VideoClip sampled2 = conditional_generate(prior, clips[0], 2, 2, 1.0, 5);
  CHECK(sampled.pixels == sampled2.pixels);  // same seed, same draw

  CHECK_THROWS_AS(conditional_generate(prior, clips[0], 0, 2, 0.0, 5), UsageError);
  CHECK_THROWS_AS(conditional_generate(prior, clips[0], 2, 200, 0.0, 5), UsageError);
}

TEST_CASE("model config accepts the published sequence lengths") {
  // 64x64 frames, p=16 -> 16 tokens per frame; lengths 4, 8, 16, 32 frames.
  for (std::size_t frames : {4UL, 8UL, 16UL, 32UL}) {
    TransformerConfig mc;
    mc.d_model = 16;
    mc.heads = 2;
    mc.d_k = 8;
    mc.d_v = 8;
    mc.vocab_size = 64;
    mc.max_len = frames * 16;
    CHECK_NOTHROW(mc.validate());
  }
}
