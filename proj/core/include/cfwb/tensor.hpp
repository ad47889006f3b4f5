// Copyright (c) 2026 The cfwb Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "cfwb/errors.hpp"
#include "cfwb/rng.hpp"

namespace cfwb {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);
std::size_t shape_size(const Shape& s);

struct TensorData {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  bool produced_by_op = false;

  std::size_t size() const { return data.size(); }
  bool wants_grad() const { return requires_grad || produced_by_op; }
  void ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
  }
};

// Dense row-major f64 tensor. Value-semantic handle; copies share storage.
// Tensors are immutable after creation except for gradient accumulation and
// in-place optimizer updates on parameter leaves.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor filled(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(d_); }
  const Shape& shape() const { return d_->shape; }
  std::size_t rank() const { return d_->shape.size(); }
  std::size_t size() const { return d_->data.size(); }

  // 2-D convenience accessors.
  std::size_t rows() const;
  std::size_t cols() const;

  double* data() { return d_->data.data(); }
  const double* data() const { return d_->data.data(); }
  const std::vector<double>& values() const { return d_->data; }

  double item() const;
  double at(std::size_t i) const;
  double at(std::size_t i, std::size_t j) const;
  double at(std::size_t i, std::size_t j, std::size_t k) const;

  bool requires_grad() const { return d_->requires_grad; }
  Tensor& set_requires_grad(bool value);

  // Gradient of the same length as data; materializes zeros for leaves the
  // backward pass never reached.
  std::vector<double>& grad();
  const std::vector<double>& grad() const;
  bool has_grad() const { return d_ && !d_->grad.empty(); }
  void zero_grad();

  std::shared_ptr<TensorData> ptr() const { return d_; }
  bool same_storage(const Tensor& other) const { return d_ == other.d_; }

 private:
  explicit Tensor(std::shared_ptr<TensorData> d) : d_(std::move(d)) {}
  std::shared_ptr<TensorData> d_;
};

// Reverse-mode tape. Construction pushes the tape as the active recording
// context for the current thread; destruction pops it. Ops executed while a
// tape is active append one record each; backward() replays the records in
// reverse order exactly once.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* current();

  void record(const std::shared_ptr<TensorData>& output, std::function<void()> backward);

  // Seeds d(loss)/d(loss) = 1 and replays the tape. The loss must be a scalar
  // produced while this tape was active.
  void backward(const Tensor& loss);

  std::size_t size() const { return records_.size(); }

 private:
  struct Record {
    std::shared_ptr<TensorData> output;
    std::function<void()> fn;
  };
  std::vector<Record> records_;
  Tape* prev_ = nullptr;
};

// Scope that suspends recording (forward-only evaluation).
class NoTape {
 public:
  NoTape();
  ~NoTape();
  NoTape(const NoTape&) = delete;
  NoTape& operator=(const NoTape&) = delete;

 private:
  Tape* saved_;
};

// When enabled (tests), every op output is checked for non-finite entries.
void set_finite_checks(bool enabled);
bool finite_checks_enabled();

namespace detail {
void maybe_check_finite(const Tensor& t, const char* op);
void set_current_tape(Tape* t);
Tape* exchange_current_tape(Tape* t);
}  // namespace detail

// Glorot-style init used for every weight matrix: uniform(-a, a) with
// a = sqrt(6 / (fan_in + fan_out)).
Tensor xavier_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng);

}  // namespace cfwb
