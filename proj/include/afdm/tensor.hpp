/* Copyright 2026 The AFDM Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace afdm {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first touched
  bool requires_grad = false;
};
}  // namespace detail

// Dense row-major array of doubles with an optional gradient buffer.
//
// Tensor is a handle: copies share the same storage. Values produced by an
// operation are never modified afterwards; parameters are updated in place by
// the optimizer through mutable_data().
class Tensor {
 public:
  Tensor();
  explicit Tensor(Shape shape, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value);

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const { return node_->value.size(); }

  std::span<const double> data() const { return node_->value; }
  std::span<double> mutable_data() { return node_->value; }
  double item() const;
  double at(std::initializer_list<std::size_t> index) const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }

  bool has_grad() const { return !node_->grad.empty(); }
  // Gradient buffer; allocated (zero-filled) on first access.
  std::span<double> mutable_grad() const;
  // Copy of the gradient, zeros when none has been accumulated.
  std::vector<double> grad() const;
  // The gradient buffer itself; empty when never allocated.
  std::span<const double> grad_view() const { return node_->grad; }
  void zero_grad() const;

  // Deep copy of the values; the copy does not require grad.
  Tensor detach() const;
  Tensor reshaped(Shape shape) const;  // view-free copy with a new shape

  bool is_same(const Tensor& other) const { return node_ == other.node_; }

 private:
  friend class Tape;
  std::shared_ptr<detail::Node> node_;
};

// Ordered record of the operations executed while it is active. backward()
// replays the record in reverse.
class Tape {
 public:
  using BackwardFn = std::function<void(const Tensor& output)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(Tensor output, std::vector<Tensor> inputs, BackwardFn backward);

  // Populates gradients of every requires_grad tensor reachable from `loss`.
  // Gradients of all tensors touched by this tape are reset first, so tensors
  // recorded here that do not influence the loss end up with zero gradient.
  void backward(const Tensor& loss);

  std::size_t size() const { return entries_.size(); }
  void clear() { entries_.clear(); }

  // The tape active on the calling thread, or nullptr.
  static Tape* active();

 private:
  friend class TapeScope;
  struct Entry {
    Tensor output;
    std::vector<Tensor> inputs;
    BackwardFn backward;
  };
  std::vector<Entry> entries_;
};

// Activates a tape for the current thread for the lifetime of the scope.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

// Disables recording on the current thread for the lifetime of the scope.
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape* previous_;
};

// Builds the output of a primitive. When a tape is active and any input
// requires grad, the output requires grad and `backward` is recorded.
Tensor make_result(Shape shape, std::vector<double> values,
                   std::vector<Tensor> inputs, Tape::BackwardFn backward);

// Adds `delta` into the gradient of `t` when it requires grad.
void accumulate_grad(const Tensor& t, std::span<const double> delta);

}  // namespace afdm
