// Copyright (c) 2026 The cfwb Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

namespace cfwb {

enum class LogLevel { kError = 0, kInfo = 1, kDebug = 2 };

// Level comes from the CF_LOG environment variable: error | info | debug.
LogLevel log_level();
void set_log_level(LogLevel level);

void log_error(const std::string& msg);
void log_info(const std::string& msg);
void log_debug(const std::string& msg);

}  // namespace cfwb
