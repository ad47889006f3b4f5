// Copyright (c) 2026 The cfwb Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cfwb/rng.hpp"

namespace cfwb {

// Integer sprite state at one frame: top-left corner and per-axis velocity in
// pixels/frame. Velocities only flip sign at wall reflections.
struct SpriteTrack {
  int x = 0;
  int y = 0;
  int vx = 0;
  int vy = 0;
};

// Grayscale clip plus per-sprite tracks and per-frame collision flags.
struct VideoClip {
  std::size_t t = 0;
  std::size_t h = 0;
  std::size_t w = 0;
  std::size_t sprite_size = 0;
  std::vector<std::uint8_t> pixels;                // t*h*w, frame-major row-major
  std::vector<std::vector<SpriteTrack>> tracks;    // [sprite][frame]
  std::vector<std::uint8_t> collision_flags;       // [frame], 0/1

  std::uint8_t pixel(std::size_t frame, std::size_t row, std::size_t col) const {
    return pixels[(frame * h + row) * w + col];
  }
  const std::uint8_t* frame_data(std::size_t frame) const { return pixels.data() + frame * h * w; }
};

struct ClipConfig {
  std::size_t n_sprites = 2;
  std::size_t t = 8;
  std::size_t h = 64;
  std::size_t w = 64;
  std::size_t sprite_size = 12;
  int speed_min = 1;
  int speed_max = 2;
  // Optional stamp bitmaps (each sprite_size x sprite_size); solid squares
  // when empty. Sprites cycle through the list.
  std::vector<std::vector<std::uint8_t>> stamps;
};

// One clip from one seeded generator. Sprites reflect elastically off walls
// and pass over each other with max blending; collision_flags[t] marks any
// bounding-box overlap at frame t.
VideoClip generate_clip(const ClipConfig& cfg, std::uint64_t seed);

// n_clips independent clips with seed_i = seed + i.
std::vector<VideoClip> generate_clips(const ClipConfig& cfg, std::size_t n_clips,
                                      std::uint64_t seed, std::size_t parallelism = 1);

// Binary clip format: magic "MVC1", five u32 LE (version=1, T, H, W,
// n_sprites), then T*H*W pixel bytes. Tracks and collision flags live in a
// JSON sidecar `<path>.labels.json`.
void save_clip(const std::string& path, const VideoClip& clip);
VideoClip load_clip(const std::string& path);

// One P5 portable graymap per frame.
void write_frame_pgm(const std::string& path, const VideoClip& clip, std::size_t frame);

// PGM loader for pluggable digit/stamp bitmaps.
std::vector<std::uint8_t> load_pgm(const std::string& path, std::size_t& out_w,
                                   std::size_t& out_h);

struct FrameMetrics {
  double pixel_mse = 0.0;
  double pixel_accuracy = 0.0;  // binarized at threshold 128
  double centroid_error = 0.0;  // mean L2 distance between bright-mass centroids
};

// Metrics over frames [from_frame, T). Zero-mass frames pair at distance 0
// with other zero-mass frames and at the frame diagonal otherwise.
FrameMetrics frame_metrics(const VideoClip& predicted, const VideoClip& truth,
                           std::size_t from_frame);

// Lossless tiling of one frame into (h/p)*(w/p) patch vectors of length p*p,
// raster order, raw 0..255 values.
std::vector<std::vector<double>> patchify(const std::uint8_t* frame, std::size_t h, std::size_t w,
                                          std::size_t p);
void unpatchify(const std::vector<std::vector<double>>& patches, std::size_t h, std::size_t w,
                std::size_t p, std::uint8_t* out_frame);

}  // namespace cfwb
