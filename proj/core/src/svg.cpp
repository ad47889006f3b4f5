// Copyright (c) 2026 The cfwb Authors
// SPDX-License-Identifier: Apache-2.0

#include "cfwb/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "cfwb/errors.hpp"

namespace cfwb {

namespace {

constexpr int kWidth = 900;
constexpr int kHeight = 420;
constexpr int kPad = 40;

std::string fixed(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

std::string polyline(const std::vector<double>& values, double lo, double hi, std::size_t count,
                     const char* color) {
  std::string pts;
  const double span = hi - lo > 0 ? hi - lo : 1.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double x =
        kPad + (kWidth - 2.0 * kPad) * (count > 1 ? static_cast<double>(i) / (count - 1) : 0.0);
    const double y = kHeight - kPad - (kHeight - 2.0 * kPad) * ((values[i] - lo) / span);
    if (!pts.empty()) pts += ' ';
    pts += fixed(x) + "," + fixed(y);
  }
  return "  <polyline fill=\"none\" stroke=\"" + std::string(color) +
         "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
}

}  // namespace

void write_forecast_svg(const std::string& path, const std::vector<double>& actual,
                        const std::vector<double>& predicted, const std::string& title) {
  if (actual.empty() && predicted.empty()) throw UsageError("svg: nothing to plot");
  double lo = INFINITY, hi = -INFINITY;
  for (const auto* v : {&actual, &predicted}) {
    for (double x : *v) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  }
  const std::size_t count = std::max(actual.size(), predicted.size());

  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("svg: cannot open '" + path + "'");
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
  os << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "  <text x=\"" << kPad << "\" y=\"24\" font-family=\"monospace\" font-size=\"14\">" << title
     << " (blue=actual red=predicted)</text>\n";
  if (!actual.empty()) os << polyline(actual, lo, hi, count, "#1f4fd8");
  if (!predicted.empty()) os << polyline(predicted, lo, hi, count, "#d82f1f");
  os << "</svg>\n";
  if (!os) throw DataError("svg: write to '" + path + "' failed");
}

}  // namespace cfwb
