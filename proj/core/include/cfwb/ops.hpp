// Copyright (c) 2026 The cfwb Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "cfwb/tensor.hpp"

namespace cfwb {

// All ops are pure: they allocate a fresh output tensor and, when a Tape is
// active, register a reverse rule that accumulates into the operands' grads.
// Binary ops require exactly equal shapes; the only broadcasts are the
// explicit scalar and row-bias variants below.

// --- linear algebra ---
Tensor matmul(const Tensor& a, const Tensor& b);  // (m x k)(k x n) -> (m x n)
Tensor transpose(const Tensor& a);                // 2-D
Tensor reshape(const Tensor& a, Shape shape);     // same element count

// --- structure ---
Tensor slice_rows(const Tensor& a, std::size_t r0, std::size_t r1);  // rows [r0, r1)
Tensor slice_cols(const Tensor& a, std::size_t c0, std::size_t c1);  // cols [c0, c1)
Tensor gather_rows(const Tensor& a, std::vector<std::size_t> idx);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_cols(std::span<const Tensor> parts);

// --- elementwise ---
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double c);
Tensor mul_scalar(const Tensor& a, double c);
Tensor add_bias_rows(const Tensor& x, const Tensor& bias);  // (T x N) + (N)
Tensor relu(const Tensor& a);
Tensor gelu(const Tensor& a);  // tanh approximation
Tensor tanh_t(const Tensor& a);
Tensor sigmoid_t(const Tensor& a);

// Row-wise layer norm over the last axis of a 2-D tensor; gain/bias are
// length-N vectors. Variance epsilon is 1e-5.
Tensor layer_norm_rows(const Tensor& x, const Tensor& gain, const Tensor& bias);

// Softmax along `axis` of a 1-D or 2-D tensor with max-subtraction.
Tensor softmax(const Tensor& x, std::size_t axis);

// Causal 1-D convolution: x is (T x D_in), kernel is (k x D_in x D_out); the
// input is implicitly left-padded with k-1 zero rows, so out[t] sees only
// x[max(0, t-k+1) .. t].
Tensor causal_conv1d(const Tensor& x, const Tensor& kernel);

// Token embedding lookup: ids index rows of table (V x d).
Tensor embedding(const std::vector<int>& ids, const Tensor& table);

// --- reductions & losses ---
Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
Tensor mse_loss(const Tensor& pred, const Tensor& target);
// Mean negative log-likelihood over rows; logits (T x V), targets in [0, V).
Tensor cross_entropy_loss(const Tensor& logits, const std::vector<int>& targets);

namespace testing {
// Fault-injection fixture for the gradcheck command: skews the matmul
// backward rule so gradient verification must fail.
void set_matmul_backward_fault(bool enabled);
}  // namespace testing

}  // namespace cfwb
