// Copyright (c) 2026 The cfwb Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <CLI11.hpp>

namespace cfwb::cli {

void register_synth_series(CLI::App& app);
void register_train_forecaster(CLI::App& app);
void register_forecast(CLI::App& app);
void register_compare(CLI::App& app);
void register_bench_attention(CLI::App& app);
void register_gradcheck(CLI::App& app);
void register_synth_clips(CLI::App& app);
void register_train_frames(CLI::App& app);
void register_predict_frames(CLI::App& app);

}  // namespace cfwb::cli
