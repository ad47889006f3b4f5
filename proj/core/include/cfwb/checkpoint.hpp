// Copyright (c) 2026 The cfwb Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cfwb/tensor.hpp"

namespace cfwb {

// Binary checkpoint: magic "CFWB1", a length-prefixed UTF-8 header of
// key=value lines, then each named tensor as
//   (u32 name length, name bytes, u32 rank, u32 dims..., f64 data)
// with all integers and reals little-endian. Save/load round-trips bit-exact.
struct Checkpoint {
  std::map<std::string, std::string> config;
  std::vector<std::pair<std::string, Tensor>> tensors;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace cfwb
