// Copyright (c) 2026 The cfwb Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cfwb/rng.hpp"

namespace cfwb {

// Univariate time series. Timestamps are ISO-8601 dates, strictly increasing;
// synthetic series may leave them empty.
struct Series {
  std::vector<std::string> timestamps;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
};

// Civil-date helpers (proleptic Gregorian).
std::int64_t days_from_date(const std::string& iso);  // days since 1970-01-01
std::string date_from_days(std::int64_t days);
bool is_weekday(std::int64_t days);

// CSV with header `date,close`. Malformed values and non-monotonic dates
// raise DataError naming the offending row; a missing or wrong header raises
// FormatError.
Series load_series(const std::string& path);

// CSV writer for the same format. Synthetic series without timestamps get
// sequential dates starting at `start_date`.
void save_series(const std::string& path, const Series& series,
                 const std::string& start_date = "2000-01-03");

enum class SynthKind { kSineTrendNoise, kRandomWalk, kSquareSeasonal };

SynthKind synth_kind_from_string(const std::string& name);
std::string to_string(SynthKind kind);

struct SynthParams {
  double amplitude = 1.0;
  double period = 32.0;
  double trend = 0.0;
  double sigma = 0.0;
  double start = 0.0;  // random-walk origin
};

// sine+trend+noise: v_t = a sin(2 pi t / P) + b t + eps_t, eps ~ N(0, sigma^2).
// random walk:      v_t = v_{t-1} + b + eps_t, v_0 = start.
// square-seasonal:  v_t = a square(t; P) + b t + eps_t.
Series synth_series(SynthKind kind, const SynthParams& params, std::size_t n, std::uint64_t seed);

}  // namespace cfwb
