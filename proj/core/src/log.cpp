// Copyright (c) 2026 The cfwb Authors
// SPDX-License-Identifier: Apache-2.0

#include "cfwb/log.hpp"

#include <cstdlib>
#include <iostream>
#include <optional>

namespace cfwb {

namespace {

LogLevel level_from_env() {
  const char* v = std::getenv("CF_LOG");
  if (v == nullptr) return LogLevel::kError;
  std::string s(v);
  if (s == "debug") return LogLevel::kDebug;
  if (s == "info") return LogLevel::kInfo;
  return LogLevel::kError;
}

std::optional<LogLevel>& override_level() {
  static std::optional<LogLevel> lvl;
  return lvl;
}

}  // namespace

LogLevel log_level() {
  if (override_level()) return *override_level();
  static LogLevel env_level = level_from_env();
  return env_level;
}

void set_log_level(LogLevel level) { override_level() = level; }

void log_error(const std::string& msg) { std::cerr << "[cfwb:error] " << msg << "\n"; }

void log_info(const std::string& msg) {
  if (log_level() >= LogLevel::kInfo) std::cerr << "[cfwb:info] " << msg << "\n";
}

void log_debug(const std::string& msg) {
  if (log_level() >= LogLevel::kDebug) std::cerr << "[cfwb:debug] " << msg << "\n";
}

}  // namespace cfwb
