// Copyright (c) 2026 The cfwb Authors
// SPDX-License-Identifier: Apache-2.0

#include "cfwb/series.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include "cfwb/errors.hpp"
#include "cfwb/log.hpp"

namespace cfwb {

namespace {

// Howard Hinnant's civil-from-days / days-from-civil algorithms.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, std::int64_t& y, unsigned& m, unsigned& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp + (mp < 10 ? 3 : -9);
  y += (m <= 2);
}

}  // namespace

std::int64_t days_from_date(const std::string& iso) {
  if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') {
    throw DataError("date '" + iso + "' is not ISO-8601 (YYYY-MM-DD)");
  }
  auto parse_num = [&iso](std::size_t from, std::size_t len) {
    int value = 0;
    const char* first = iso.data() + from;
    auto [p, ec] = std::from_chars(first, first + len, value);
    if (ec != std::errc() || p != first + len) {
      throw DataError("date '" + iso + "' is not ISO-8601 (YYYY-MM-DD)");
    }
    return value;
  };
  const int y = parse_num(0, 4);
  const int m = parse_num(5, 2);
  const int d = parse_num(8, 2);
  if (m < 1 || m > 12 || d < 1 || d > 31) throw DataError("date '" + iso + "' out of range");
  return days_from_civil(y, static_cast<unsigned>(m), static_cast<unsigned>(d));
}

std::string date_from_days(std::int64_t days) {
  std::int64_t y;
  unsigned m, d;
  civil_from_days(days, y, m, d);
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04lld-%02u-%02u", static_cast<long long>(y), m, d);
  return buf;
}

bool is_weekday(std::int64_t days) {
  // 1970-01-01 was a Thursday (weekday 4 with Monday = 0).
  const std::int64_t wd = ((days % 7) + 7 + 3) % 7;
  return wd < 5;
}

Series load_series(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("series: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(is, line)) throw FormatError("series: '" + path + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "date,close") {
    throw FormatError("series: '" + path + "' must start with header 'date,close', got '" + line +
                      "'");
  }
  Series series;
  std::size_t row = 0;
  std::size_t blank = 0;
  std::int64_t prev_days = 0;
  while (std::getline(is, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      ++blank;
      continue;
    }
    const std::size_t comma = line.find(',');
    if (comma == std::string::npos) {
      throw DataError("series: row " + std::to_string(row) + " has no comma: '" + line + "'");
    }
    const std::string date = line.substr(0, comma);
    const std::string value_text = line.substr(comma + 1);
    std::int64_t days;
    try {
      days = days_from_date(date);
    } catch (const DataError& e) {
      throw DataError("series: row " + std::to_string(row) + ": " + e.what());
    }
    if (!series.values.empty() && days <= prev_days) {
      throw DataError("series: row " + std::to_string(row) + " date '" + date +
                      "' is not strictly increasing");
    }
    double value = 0.0;
    const char* first = value_text.data();
    const char* last = first + value_text.size();
    auto [p, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || p != last || !std::isfinite(value)) {
      throw DataError("series: row " + std::to_string(row) + " close value '" + value_text +
                      "' is not a finite number");
    }
    prev_days = days;
    series.timestamps.push_back(date);
    series.values.push_back(value);
  }
  if (blank > 0) log_info("series: skipped " + std::to_string(blank) + " blank rows");
  return series;
}

void save_series(const std::string& path, const Series& series, const std::string& start_date) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("series: cannot open '" + path + "' for writing");
  os << "date,close\n";
  const bool have_dates = series.timestamps.size() == series.values.size();
  std::int64_t day0 = have_dates ? 0 : days_from_date(start_date);
  for (std::size_t i = 0; i < series.values.size(); ++i) {
    char num[64];
    const auto [end, ec] = std::to_chars(num, num + sizeof(num), series.values[i]);
    if (ec != std::errc()) throw NumericError("series: could not format value");
    const std::string date =
        have_dates ? series.timestamps[i] : date_from_days(day0 + static_cast<std::int64_t>(i));
    os << date << ',' << std::string_view(num, end - num) << '\n';
  }
  if (!os) throw DataError("series: write to '" + path + "' failed");
}

SynthKind synth_kind_from_string(const std::string& name) {
  if (name == "sine") return SynthKind::kSineTrendNoise;
  if (name == "walk") return SynthKind::kRandomWalk;
  if (name == "square") return SynthKind::kSquareSeasonal;
  throw ConfigError("unknown synth kind '" + name + "' (expected sine|walk|square)");
}

std::string to_string(SynthKind kind) {
  switch (kind) {
    case SynthKind::kSineTrendNoise: return "sine";
    case SynthKind::kRandomWalk: return "walk";
    case SynthKind::kSquareSeasonal: return "square";
  }
  throw ConfigError("unknown synth kind");
}

Series synth_series(SynthKind kind, const SynthParams& params, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw ConfigError("synth_series: n must be >= 1");
  if (params.period <= 0.0) throw ConfigError("synth_series: period must be positive");
  Rng rng = Rng(seed).substream("series");
  Series s;
  s.values.resize(n);
  switch (kind) {
    case SynthKind::kSineTrendNoise:
      for (std::size_t t = 0; t < n; ++t) {
        const double noise = params.sigma > 0.0 ? params.sigma * rng.normal() : 0.0;
        s.values[t] = params.amplitude * std::sin(2.0 * M_PI * static_cast<double>(t) / params.period) +
                      params.trend * static_cast<double>(t) + noise;
      }
      break;
    case SynthKind::kRandomWalk: {
      double v = params.start;
      for (std::size_t t = 0; t < n; ++t) {
        s.values[t] = v;
        v += params.trend + (params.sigma > 0.0 ? params.sigma * rng.normal() : 0.0);
      }
      break;
    }
    case SynthKind::kSquareSeasonal: {
      const std::size_t period = static_cast<std::size_t>(params.period);
      for (std::size_t t = 0; t < n; ++t) {
        const double square = (t % period) < period / 2 ? 1.0 : -1.0;
        const double noise = params.sigma > 0.0 ? params.sigma * rng.normal() : 0.0;
        s.values[t] = params.amplitude * square + params.trend * static_cast<double>(t) + noise;
      }
      break;
    }
  }
  return s;
}

}  // namespace cfwb
