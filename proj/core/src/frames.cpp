// Copyright (c) 2026 The cfwb Authors
// SPDX-License-Identifier: Apache-2.0

#include "cfwb/frames.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "cfwb/errors.hpp"

namespace cfwb {

namespace {

constexpr char kMagic[4] = {'M', 'V', 'C', '1'};

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw FormatError("clip: truncated file");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

// Move one axis by v inside [0, limit], mirroring at the walls.
void step_axis(int& pos, int& vel, int limit) {
  pos += vel;
  if (pos < 0) {
    pos = -pos;
    vel = -vel;
  } else if (pos > limit) {
    pos = 2 * limit - pos;
    vel = -vel;
  }
}

void render_frame(VideoClip& clip, const ClipConfig& cfg, std::size_t frame) {
  const std::size_t s = cfg.sprite_size;
  std::uint8_t* out = clip.pixels.data() + frame * clip.h * clip.w;
  for (std::size_t sp = 0; sp < clip.tracks.size(); ++sp) {
    const SpriteTrack& tr = clip.tracks[sp][frame];
    const std::uint8_t* stamp =
        cfg.stamps.empty() ? nullptr : cfg.stamps[sp % cfg.stamps.size()].data();
    for (std::size_t r = 0; r < s; ++r) {
      for (std::size_t c = 0; c < s; ++c) {
        const std::uint8_t value = stamp == nullptr ? 255 : stamp[r * s + c];
        std::uint8_t& px = out[(static_cast<std::size_t>(tr.y) + r) * clip.w +
                               static_cast<std::size_t>(tr.x) + c];
        px = std::max(px, value);  // sprites pass over each other
      }
    }
  }
}

bool boxes_overlap(const SpriteTrack& a, const SpriteTrack& b, int s) {
  return a.x < b.x + s && b.x < a.x + s && a.y < b.y + s && b.y < a.y + s;
}

}  // namespace

VideoClip generate_clip(const ClipConfig& cfg, std::uint64_t seed) {
  if (cfg.t < 1) throw ConfigError("generate_clip: need at least one frame");
  if (cfg.n_sprites < 1) throw ConfigError("generate_clip: need at least one sprite");
  if (cfg.sprite_size >= std::min(cfg.h, cfg.w)) {
    throw ConfigError("generate_clip: sprite size " + std::to_string(cfg.sprite_size) +
                      " does not fit in a " + std::to_string(cfg.w) + "x" + std::to_string(cfg.h) +
                      " box");
  }
  if (cfg.speed_min < 0 || cfg.speed_max < cfg.speed_min) {
    throw ConfigError("generate_clip: invalid speed range");
  }
  for (const auto& stamp : cfg.stamps) {
    if (stamp.size() != cfg.sprite_size * cfg.sprite_size) {
      throw ConfigError("generate_clip: stamp bitmap does not match sprite size");
    }
  }

  VideoClip clip;
  clip.t = cfg.t;
  clip.h = cfg.h;
  clip.w = cfg.w;
  clip.sprite_size = cfg.sprite_size;
  clip.pixels.assign(cfg.t * cfg.h * cfg.w, 0);
  clip.collision_flags.assign(cfg.t, 0);
  clip.tracks.assign(cfg.n_sprites, std::vector<SpriteTrack>(cfg.t));

  Rng rng = Rng(seed).substream("clip");
  const int max_x = static_cast<int>(cfg.w - cfg.sprite_size);
  const int max_y = static_cast<int>(cfg.h - cfg.sprite_size);
  std::vector<SpriteTrack> state(cfg.n_sprites);
  for (auto& sp : state) {
    sp.x = static_cast<int>(rng.uniform_int(0, max_x));
    sp.y = static_cast<int>(rng.uniform_int(0, max_y));
    const int mx = static_cast<int>(rng.uniform_int(cfg.speed_min, cfg.speed_max));
    const int my = static_cast<int>(rng.uniform_int(cfg.speed_min, cfg.speed_max));
    sp.vx = rng.uniform() < 0.5 ? mx : -mx;
    sp.vy = rng.uniform() < 0.5 ? my : -my;
  }

  for (std::size_t f = 0; f < cfg.t; ++f) {
    for (std::size_t i = 0; i < state.size(); ++i) clip.tracks[i][f] = state[i];
    bool collided = false;
    for (std::size_t a = 0; a < state.size() && !collided; ++a) {
      for (std::size_t b = a + 1; b < state.size() && !collided; ++b) {
        collided = boxes_overlap(state[a], state[b], static_cast<int>(cfg.sprite_size));
      }
    }
    clip.collision_flags[f] = collided ? 1 : 0;
    render_frame(clip, cfg, f);
    for (auto& sp : state) {
      step_axis(sp.x, sp.vx, max_x);
      step_axis(sp.y, sp.vy, max_y);
    }
  }
  return clip;
}

std::vector<VideoClip> generate_clips(const ClipConfig& cfg, std::size_t n_clips,
                                      std::uint64_t seed, std::size_t parallelism) {
  std::vector<VideoClip> clips(n_clips);
  if (parallelism <= 1 || n_clips < 2) {
    for (std::size_t i = 0; i < n_clips; ++i) clips[i] = generate_clip(cfg, seed + i);
    return clips;
  }
  // Clips are independent (seed_i = seed + i), so any split is merge-safe;
  // results land at their index, keeping deterministic seed order.
  const std::size_t workers = std::min(parallelism, n_clips);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t wkr = 0; wkr < workers; ++wkr) {
    pool.emplace_back([&, wkr] {
      for (std::size_t i = wkr; i < n_clips; i += workers) {
        clips[i] = generate_clip(cfg, seed + i);
      }
    });
  }
  for (auto& th : pool) th.join();
  return clips;
}

void save_clip(const std::string& path, const VideoClip& clip) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("clip: cannot open '" + path + "' for writing");
  os.write(kMagic, sizeof(kMagic));
  put_u32(os, 1);
  put_u32(os, static_cast<std::uint32_t>(clip.t));
  put_u32(os, static_cast<std::uint32_t>(clip.h));
  put_u32(os, static_cast<std::uint32_t>(clip.w));
  put_u32(os, static_cast<std::uint32_t>(clip.tracks.size()));
  os.write(reinterpret_cast<const char*>(clip.pixels.data()),
           static_cast<std::streamsize>(clip.pixels.size()));
  if (!os) throw DataError("clip: write to '" + path + "' failed");

  nlohmann::ordered_json j;
  j["sprite_size"] = clip.sprite_size;
  j["tracks"] = nlohmann::ordered_json::array();
  for (const auto& sprite : clip.tracks) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& tr : sprite) arr.push_back({tr.x, tr.y, tr.vx, tr.vy});
    j["tracks"].push_back(arr);
  }
  j["collision_flags"] = nlohmann::ordered_json::array();
  for (std::uint8_t f : clip.collision_flags) j["collision_flags"].push_back(f != 0);

  std::ofstream js(path + ".labels.json", std::ios::trunc);
  if (!js) throw DataError("clip: cannot open labels sidecar for '" + path + "'");
  js << j.dump(2) << "\n";
}

VideoClip load_clip(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("clip: cannot open '" + path + "'");
  char magic[4];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw FormatError("clip: bad magic in '" + path + "'");
  }
  const std::uint32_t version = get_u32(is);
  if (version != 1) throw FormatError("clip: unsupported version " + std::to_string(version));
  VideoClip clip;
  clip.t = get_u32(is);
  clip.h = get_u32(is);
  clip.w = get_u32(is);
  const std::uint32_t n_sprites = get_u32(is);
  clip.pixels.resize(clip.t * clip.h * clip.w);
  is.read(reinterpret_cast<char*>(clip.pixels.data()),
          static_cast<std::streamsize>(clip.pixels.size()));
  if (!is) throw FormatError("clip: truncated pixel data in '" + path + "'");

  std::ifstream js(path + ".labels.json");
  if (js) {
    nlohmann::json j = nlohmann::json::parse(js, nullptr, true);
    clip.sprite_size = j.value("sprite_size", std::size_t{0});
    if (j.contains("tracks")) {
      for (const auto& sprite : j["tracks"]) {
        std::vector<SpriteTrack> trs;
        for (const auto& tr : sprite) {
          trs.push_back({tr[0].get<int>(), tr[1].get<int>(), tr[2].get<int>(), tr[3].get<int>()});
        }
        clip.tracks.push_back(std::move(trs));
      }
    }
    if (j.contains("collision_flags")) {
      for (const auto& f : j["collision_flags"]) clip.collision_flags.push_back(f.get<bool>() ? 1 : 0);
    }
    if (clip.tracks.size() != n_sprites) {
      throw FormatError("clip: sidecar tracks do not match sprite count in '" + path + "'");
    }
  }
  return clip;
}

void write_frame_pgm(const std::string& path, const VideoClip& clip, std::size_t frame) {
  if (frame >= clip.t) throw UsageError("pgm: frame index out of range");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("pgm: cannot open '" + path + "'");
  os << "P5\n" << clip.w << " " << clip.h << "\n255\n";
  os.write(reinterpret_cast<const char*>(clip.frame_data(frame)),
           static_cast<std::streamsize>(clip.h * clip.w));
  if (!os) throw DataError("pgm: write to '" + path + "' failed");
}

std::vector<std::uint8_t> load_pgm(const std::string& path, std::size_t& out_w,
                                   std::size_t& out_h) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("pgm: cannot open '" + path + "'");
  std::string magic;
  is >> magic;
  if (magic != "P5") throw FormatError("pgm: '" + path + "' is not a P5 graymap");
  std::size_t w = 0, h = 0, maxval = 0;
  is >> w >> h >> maxval;
  if (!is || w == 0 || h == 0 || maxval != 255) throw FormatError("pgm: bad header in '" + path + "'");
  is.get();  // single whitespace after header
  std::vector<std::uint8_t> data(w * h);
  is.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!is) throw FormatError("pgm: truncated data in '" + path + "'");
  out_w = w;
  out_h = h;
  return data;
}

FrameMetrics frame_metrics(const VideoClip& predicted, const VideoClip& truth,
                           std::size_t from_frame) {
  if (predicted.t != truth.t || predicted.h != truth.h || predicted.w != truth.w) {
    throw UsageError("frame_metrics: clip dimensions differ");
  }
  if (from_frame >= truth.t) throw UsageError("frame_metrics: from_frame out of range");
  FrameMetrics m;
  const std::size_t frames = truth.t - from_frame;
  const std::size_t per_frame = truth.h * truth.w;
  std::size_t matches = 0;
  double centroid_sum = 0.0;
  for (std::size_t f = from_frame; f < truth.t; ++f) {
    const std::uint8_t* a = predicted.frame_data(f);
    const std::uint8_t* b = truth.frame_data(f);
    double cax = 0, cay = 0, cam = 0, cbx = 0, cby = 0, cbm = 0;
    for (std::size_t r = 0; r < truth.h; ++r) {
      for (std::size_t c = 0; c < truth.w; ++c) {
        const double av = a[r * truth.w + c];
        const double bv = b[r * truth.w + c];
        m.pixel_mse += (av - bv) * (av - bv);
        if ((av >= 128.0) == (bv >= 128.0)) ++matches;
        cax += av * static_cast<double>(c);
        cay += av * static_cast<double>(r);
        cam += av;
        cbx += bv * static_cast<double>(c);
        cby += bv * static_cast<double>(r);
        cbm += bv;
      }
    }
    if (cam > 0.0 && cbm > 0.0) {
      const double dx = cax / cam - cbx / cbm;
      const double dy = cay / cam - cby / cbm;
      centroid_sum += std::hypot(dx, dy);
    } else if (cam > 0.0 || cbm > 0.0) {
      centroid_sum += std::hypot(static_cast<double>(truth.w), static_cast<double>(truth.h));
    }
  }
  m.pixel_mse /= static_cast<double>(frames * per_frame);
  m.pixel_accuracy = static_cast<double>(matches) / static_cast<double>(frames * per_frame);
  m.centroid_error = centroid_sum / static_cast<double>(frames);
  return m;
}

std::vector<std::vector<double>> patchify(const std::uint8_t* frame, std::size_t h, std::size_t w,
                                          std::size_t p) {
  if (p == 0 || h % p != 0 || w % p != 0) {
    throw ConfigError("patchify: patch size " + std::to_string(p) + " must divide " +
                      std::to_string(w) + "x" + std::to_string(h));
  }
  const std::size_t rows = h / p, cols = w / p;
  std::vector<std::vector<double>> patches(rows * cols, std::vector<double>(p * p));
  for (std::size_t pr = 0; pr < rows; ++pr) {
    for (std::size_t pc = 0; pc < cols; ++pc) {
      auto& patch = patches[pr * cols + pc];
      for (std::size_t r = 0; r < p; ++r)
        for (std::size_t c = 0; c < p; ++c)
          patch[r * p + c] = frame[(pr * p + r) * w + pc * p + c];
    }
  }
  return patches;
}

void unpatchify(const std::vector<std::vector<double>>& patches, std::size_t h, std::size_t w,
                std::size_t p, std::uint8_t* out_frame) {
  if (p == 0 || h % p != 0 || w % p != 0) throw ConfigError("unpatchify: patch size must divide frame");
  const std::size_t rows = h / p, cols = w / p;
  if (patches.size() != rows * cols) throw ShapeError("unpatchify: wrong patch count");
  for (std::size_t pr = 0; pr < rows; ++pr) {
    for (std::size_t pc = 0; pc < cols; ++pc) {
      const auto& patch = patches[pr * cols + pc];
      if (patch.size() != p * p) throw ShapeError("unpatchify: wrong patch length");
      for (std::size_t r = 0; r < p; ++r) {
        for (std::size_t c = 0; c < p; ++c) {
          const double v = std::clamp(patch[r * p + c], 0.0, 255.0);
          out_frame[(pr * p + r) * w + pc * p + c] = static_cast<std::uint8_t>(std::lround(v));
        }
      }
    }
  }
}

}  // namespace cfwb
