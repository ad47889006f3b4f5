// Copyright (c) 2026 The cfwb Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string_view>

namespace cfwb {

// Deterministic xoshiro256++ generator. All randomness in the workbench flows
// through this class so that results are bit-reproducible across platforms;
// the standard library distributions are implementation-defined and are not
// used anywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  // Independent stream derived from (seed, name). Used for the named
  // sub-streams "data", "init" and "sampling".
  Rng substream(std::string_view name) const;

  std::uint64_t next_u64();

  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  // Uniform in [lo, hi).
  double uniform(double lo, double hi);
  // Standard normal via Box-Muller.
  double normal();
  // Uniform integer in [lo, hi], bounds inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t s_[4] = {0, 0, 0, 0};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace cfwb
