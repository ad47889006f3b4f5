// Copyright (c) 2026 The cfwb Authors
// SPDX-License-Identifier: Apache-2.0

#include "cfwb/tensor.hpp"

#include <cmath>
#include <sstream>

namespace cfwb {

namespace {
thread_local Tape* tl_current_tape = nullptr;
bool g_finite_checks = false;
}  // namespace

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << "x";
    os << s[i];
  }
  os << ")";
  return os.str();
}

std::size_t shape_size(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return filled(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::filled(Shape shape, double value, bool requires_grad) {
  auto d = std::make_shared<TensorData>();
  d->shape = std::move(shape);
  for (std::size_t dim : d->shape) {
    if (dim == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(d->shape));
  }
  d->data.assign(shape_size(d->shape), value);
  d->requires_grad = requires_grad;
  return Tensor(std::move(d));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
  if (shape_size(shape) != data.size()) {
    throw ShapeError("data length " + std::to_string(data.size()) + " does not match shape " +
                     shape_str(shape));
  }
  auto d = std::make_shared<TensorData>();
  d->shape = std::move(shape);
  for (std::size_t dim : d->shape) {
    if (dim == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(d->shape));
  }
  d->data = std::move(data);
  d->requires_grad = requires_grad;
  return Tensor(std::move(d));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_data({1}, {value}, requires_grad);
}

std::size_t Tensor::rows() const {
  if (rank() != 2) throw ShapeError("rows(): tensor is not 2-D, shape " + shape_str(shape()));
  return d_->shape[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw ShapeError("cols(): tensor is not 2-D, shape " + shape_str(shape()));
  return d_->shape[1];
}

double Tensor::item() const {
  if (size() != 1) throw UsageError("item(): tensor has " + std::to_string(size()) + " entries");
  return d_->data[0];
}

double Tensor::at(std::size_t i) const { return d_->data.at(i); }

double Tensor::at(std::size_t i, std::size_t j) const {
  if (rank() != 2) throw ShapeError("at(i,j): tensor is not 2-D");
  return d_->data[i * d_->shape[1] + j];
}

double Tensor::at(std::size_t i, std::size_t j, std::size_t k) const {
  if (rank() != 3) throw ShapeError("at(i,j,k): tensor is not 3-D");
  return d_->data[(i * d_->shape[1] + j) * d_->shape[2] + k];
}

Tensor& Tensor::set_requires_grad(bool value) {
  d_->requires_grad = value;
  return *this;
}

std::vector<double>& Tensor::grad() {
  d_->ensure_grad();
  return d_->grad;
}

const std::vector<double>& Tensor::grad() const {
  d_->ensure_grad();
  return d_->grad;
}

void Tensor::zero_grad() {
  if (!d_->grad.empty()) d_->grad.assign(d_->data.size(), 0.0);
}

Tape::Tape() {
  prev_ = tl_current_tape;
  tl_current_tape = this;
}

Tape::~Tape() { tl_current_tape = prev_; }

Tape* Tape::current() { return tl_current_tape; }

void Tape::record(const std::shared_ptr<TensorData>& output, std::function<void()> backward) {
  output->produced_by_op = true;
  records_.push_back({output, std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw UsageError("backward: loss must be a scalar tensor");
  }
  if (!loss.ptr()->produced_by_op) {
    throw UsageError("backward: loss was not produced through the active tape");
  }
  loss.ptr()->ensure_grad();
  loss.ptr()->grad[0] += 1.0;
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    it->fn();
  }
}

NoTape::NoTape() { saved_ = detail::exchange_current_tape(nullptr); }
NoTape::~NoTape() { detail::set_current_tape(saved_); }

void set_finite_checks(bool enabled) { g_finite_checks = enabled; }
bool finite_checks_enabled() { return g_finite_checks; }

namespace detail {

void maybe_check_finite(const Tensor& t, const char* op) {
  if (!g_finite_checks) return;
  for (double v : t.values()) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string(op) + ": non-finite value in op output");
    }
  }
}

void set_current_tape(Tape* t) { tl_current_tape = t; }

Tape* exchange_current_tape(Tape* t) {
  Tape* prev = tl_current_tape;
  tl_current_tape = t;
  return prev;
}

}  // namespace detail

Tensor xavier_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> data(shape_size(shape));
  for (double& v : data) v = rng.uniform(-a, a);
  return Tensor::from_data(std::move(shape), std::move(data), true);
}

}  // namespace cfwb
