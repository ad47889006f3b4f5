// Copyright (c) 2026 The cfwb Authors
// SPDX-License-Identifier: Apache-2.0

#include <CLI11.hpp>
#include <iostream>

#include "cfwb/errors.hpp"
#include "cli_common.hpp"
#include "commands.hpp"

// Exit codes: 0 success, 2 usage/config error, 3 data/format error,
// 4 numerical failure.
int main(int argc, char** argv) {
  CLI::App app{"cfwb — attention, forecasting, and next-frame workbench"};
  app.require_subcommand(1);

  cfwb::cli::register_synth_series(app);
  cfwb::cli::register_train_forecaster(app);
  cfwb::cli::register_forecast(app);
  cfwb::cli::register_compare(app);
  cfwb::cli::register_bench_attention(app);
  cfwb::cli::register_gradcheck(app);
  cfwb::cli::register_synth_clips(app);
  cfwb::cli::register_train_frames(app);
  cfwb::cli::register_predict_frames(app);

  try {
    std::vector<std::string> args = cfwb::cli::expand_config_args(argc, argv);
    std::vector<const char*> cargs;
    cargs.reserve(args.size());
    for (const auto& a : args) cargs.push_back(a.c_str());
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const cfwb::NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 4;
  } catch (const cfwb::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const cfwb::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const cfwb::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const cfwb::ShapeError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
