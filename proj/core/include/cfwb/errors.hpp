// Copyright (c) 2026 The cfwb Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace cfwb {

// Error taxonomy. The CLI maps these onto exit codes:
// usage/config/shape -> 2, data/format -> 3, numerical -> 4.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes are inconsistent with the operation's contract.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A configuration value is out of its allowed domain.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// The caller violated an API precondition.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Input data is malformed or out of range.
class DataError : public Error {
 public:
  using Error::Error;
};

// An input file does not match the expected format.
class FormatError : public DataError {
 public:
  using DataError::DataError;
};

// A computation produced NaN/Inf or diverged.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace cfwb
