// Copyright (c) 2026 The cfwb Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include <json.hpp>

#include "cfwb/grad_check.hpp"
#include "cfwb/ops.hpp"
#include "cfwb/patterns.hpp"
#include "cfwb/series.hpp"
#include "cli_common.hpp"
#include "commands.hpp"

namespace cfwb::cli {

namespace {

struct SynthSeriesCmd {
  std::string kind = "sine";
  std::size_t n = 256;
  std::uint64_t seed = 0;
  double amplitude = 1.0;
  double period = 32.0;
  double trend = 0.0;
  double sigma = 0.0;
  double start = 0.0;
  std::string out = "series.csv";
  std::string config;
  std::unique_ptr<OptionSet> opts;

  void run() const {
    SynthParams params;
    params.amplitude = amplitude;
    params.period = period;
    params.trend = trend;
    params.sigma = sigma;
    params.start = start;
    Series series = synth_series(synth_kind_from_string(kind), params, n, seed);
    save_series(out, series);
    write_manifest(out + ".manifest", "synth-series", *opts);
    std::cout << "wrote " << out << " (" << series.size() << " points)\n";
  }
};

struct BenchRow {
  std::size_t n;
  std::string kind;
  PatternStats stats;
  int depth;
};

struct BenchAttentionCmd {
  std::vector<std::size_t> sizes{64, 256, 1024, 4096};
  std::vector<std::string> kinds{"full", "strided", "logsparse"};
  std::string out = "bench.json";
  std::string dump_patterns;
  std::string config;
  std::unique_ptr<OptionSet> opts;

  static SparsityPattern build(const std::string& kind, std::size_t n) {
    if (kind == "full") return full_causal_pattern(n);
    if (kind == "strided") return strided_sparse_pattern(n);
    if (kind == "logsparse") return logsparse_pattern(n);
    throw ConfigError("bench-attention: unknown mask kind '" + kind + "'");
  }

  void run() const {
    for (std::size_t n : sizes) {
      if (n < 1) throw UsageError("bench-attention: n values must be >= 1");
    }
    std::vector<BenchRow> rows;
    for (std::size_t n : sizes) {
      for (const auto& kind : kinds) {
        SparsityPattern p = build(kind, n);
        rows.push_back({n, kind, pattern_stats(p), reachability_depth(p)});
        if (!dump_patterns.empty()) {
          std::filesystem::create_directories(dump_patterns);
          std::ofstream os(dump_patterns + "/pattern_" + kind + "_" + std::to_string(n) + ".txt");
          write_pattern(os, p);
        }
      }
    }

    std::printf("%8s %-10s %14s %10s %16s %6s\n", "n", "kind", "total_pairs", "max_row",
                "bytes_estimate", "depth");
    for (const auto& r : rows) {
      std::printf("%8zu %-10s %14zu %10zu %16zu %6d\n", r.n, r.kind.c_str(), r.stats.total_pairs,
                  r.stats.max_row_cardinality, r.stats.bytes_estimate, r.depth);
    }

    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
      j.push_back({{"n", r.n},
                   {"kind", r.kind},
                   {"total_pairs", r.stats.total_pairs},
                   {"max_row_cardinality", r.stats.max_row_cardinality},
                   {"bytes_estimate", r.stats.bytes_estimate},
                   {"depth", r.depth}});
    }
    std::ofstream os(out, std::ios::trunc);
    if (!os) throw DataError("bench-attention: cannot open '" + out + "'");
    os << j.dump(2) << "\n";
    write_manifest(out + ".manifest", "bench-attention", *opts);
  }
};

struct GradcheckCmd {
  std::size_t seeds = 10;
  double tolerance = 1e-4;
  std::string corrupt;
  std::string config;
  std::unique_ptr<OptionSet> opts;

  void run() const {
    if (corrupt == "matmul") {
      testing::set_matmul_backward_fault(true);
    } else if (!corrupt.empty()) {
      throw UsageError("gradcheck: unknown --corrupt target '" + corrupt + "' (only: matmul)");
    }
    std::size_t failures = 0;
    std::string first_failure;
    std::printf("%-28s %12s  %s\n", "op", "max_rel_err", "status");
    for (const auto& check : gradcheck_registry()) {
      double worst = 0.0;
      for (std::uint64_t seed = 1; seed <= seeds; ++seed) {
        worst = std::max(worst, check.run(seed));
      }
      const bool ok = worst < tolerance;
      std::printf("%-28s %12.3e  %s\n", check.name.c_str(), worst, ok ? "pass" : "FAIL");
      if (!ok) {
        ++failures;
        if (first_failure.empty()) first_failure = check.name;
      }
    }
    testing::set_matmul_backward_fault(false);
    if (failures > 0) {
      throw NumericError("gradcheck: " + std::to_string(failures) +
                         " op(s) exceeded tolerance, first: " + first_failure);
    }
    std::printf("all %zu ops within %g\n", gradcheck_registry().size(), tolerance);
  }
};

}  // namespace

void register_synth_series(CLI::App& app) {
  auto state = std::make_shared<SynthSeriesCmd>();
  CLI::App* cmd = app.add_subcommand("synth-series", "generate a synthetic series CSV");
  state->opts = std::make_unique<OptionSet>(cmd);
  state->opts->add_string("--kind", state->kind, "sine | walk | square");
  state->opts->add_size("--n", state->n, "number of points");
  state->opts->add_u64("--seed", state->seed, "rng seed");
  state->opts->add_double("--amplitude", state->amplitude, "seasonal amplitude");
  state->opts->add_double("--period", state->period, "seasonal period");
  state->opts->add_double("--trend", state->trend, "linear trend per step");
  state->opts->add_double("--sigma", state->sigma, "noise standard deviation");
  state->opts->add_double("--start", state->start, "random-walk origin");
  state->opts->add_string("--out", state->out, "output CSV path");
  add_config_option(cmd, state->config);
  cmd->callback([state] { state->run(); });
}

void register_bench_attention(CLI::App& app) {
  auto state = std::make_shared<BenchAttentionCmd>();
  CLI::App* cmd =
      app.add_subcommand("bench-attention", "pattern size/depth table for the mask kinds");
  state->opts = std::make_unique<OptionSet>(cmd);
  state->opts->add_sizes("--n", state->sizes, "sequence lengths (comma separated)");
  state->opts->add_strings("--kinds", state->kinds, "mask kinds (full,strided,logsparse)");
  state->opts->add_string("--out", state->out, "output JSON path");
  state->opts->add_string("--dump-patterns", state->dump_patterns,
                          "directory for pattern text exports");
  add_config_option(cmd, state->config);
  cmd->callback([state] { state->run(); });
}

void register_gradcheck(CLI::App& app) {
  auto state = std::make_shared<GradcheckCmd>();
  CLI::App* cmd =
      app.add_subcommand("gradcheck", "finite-difference check of every differentiable op");
  state->opts = std::make_unique<OptionSet>(cmd);
  state->opts->add_size("--seeds", state->seeds, "seeds per op");
  state->opts->add_double("--tolerance", state->tolerance, "max relative error");
  state->opts->add_string("--corrupt", state->corrupt,
                          "fault-injection fixture: corrupt the named backward rule");
  add_config_option(cmd, state->config);
  cmd->callback([state] { state->run(); });
}

}  // namespace cfwb::cli
