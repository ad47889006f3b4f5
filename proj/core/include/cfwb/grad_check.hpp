// Copyright (c) 2026 The cfwb Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cfwb/tensor.hpp"

namespace cfwb {

// Central-difference verification of the tape gradients for a scalar-valued
// function. Returns the maximum over all input entries of
//   |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
// A NaN anywhere is reported as +infinity.
double grad_check(const std::function<Tensor(std::vector<Tensor>&)>& f, std::vector<Tensor> inputs,
                  double eps = 1e-5);

// Named gradient-check case: builds seeded random inputs and returns the
// grad_check error for one differentiable op or composite block.
struct GradCheckCase {
  std::string name;
  std::function<double(std::uint64_t seed)> run;
};

// Every differentiable op registers a case here; the gradcheck CLI command and
// the acceptance suite run all of them.
const std::vector<GradCheckCase>& gradcheck_registry();

}  // namespace cfwb
