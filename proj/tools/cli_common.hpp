// Copyright (c) 2026 The cfwb Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <CLI11.hpp>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace cfwb::cli {

// Shortest exact decimal rendering; from_chars round-trips it bit for bit.
std::string fmt_double(double v);

// Registers subcommand options so that (a) later occurrences override earlier
// ones — config-file values come first, explicit flags win — and (b) every
// resolved value can be echoed into the run manifest.
class OptionSet {
 public:
  explicit OptionSet(CLI::App* cmd) : cmd_(cmd) {}

  void add_size(const std::string& name, std::size_t& ref, const std::string& help);
  void add_u64(const std::string& name, std::uint64_t& ref, const std::string& help);
  void add_int(const std::string& name, int& ref, const std::string& help);
  void add_double(const std::string& name, double& ref, const std::string& help);
  void add_string(const std::string& name, std::string& ref, const std::string& help,
                  bool required = false);
  void add_sizes(const std::string& name, std::vector<std::size_t>& ref, const std::string& help);
  void add_strings(const std::string& name, std::vector<std::string>& ref,
                   const std::string& help);

  // Sorted key=value pairs of every registered option's resolved value.
  std::vector<std::pair<std::string, std::string>> resolved() const;

  CLI::App* cmd() const { return cmd_; }

 private:
  CLI::App* cmd_;
  std::vector<std::pair<std::string, std::function<std::string()>>> fields_;
};

// `# command=<name>` comment plus sorted key=value lines.
void write_manifest(const std::string& path, const std::string& command, const OptionSet& opts);

// Pre-pass: wherever `--config FILE` appears after the subcommand, splice the
// file's key=value lines in as `--key=value` arguments ahead of the explicit
// flags, so explicit flags take precedence.
std::vector<std::string> expand_config_args(int argc, char** argv);

// Registers the --config option itself (value consumed by the pre-pass).
void add_config_option(CLI::App* cmd, std::string& sink);

}  // namespace cfwb::cli
