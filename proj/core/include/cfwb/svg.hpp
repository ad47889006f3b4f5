// Copyright (c) 2026 The cfwb Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

namespace cfwb {

// Self-contained SVG line chart, no external renderer. Output is byte-stable
// for identical inputs.
void write_forecast_svg(const std::string& path, const std::vector<double>& actual,
                        const std::vector<double>& predicted, const std::string& title);

}  // namespace cfwb
