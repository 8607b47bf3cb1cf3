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
#include <span>
#include <vector>

#include "afdm/tensor.hpp"

// Differentiable primitives. Every function records itself on the active tape
// (see Tape) when one of its inputs requires grad.
namespace afdm {

// [M x K] . [K x N] -> [M x N]
Tensor matmul(const Tensor& a, const Tensor& b);

// Pointwise binary ops with numpy-style broadcasting.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor neg(const Tensor& x);
Tensor exp(const Tensor& x);
// Throws DomainError when any element is <= 0.
Tensor log(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double offset);

Tensor sum(const Tensor& x);   // -> scalar
Tensor mean(const Tensor& x);  // -> scalar

Tensor reshape(const Tensor& x, Shape shape);
Tensor permute(const Tensor& x, std::span<const std::size_t> axes);
Tensor permute(const Tensor& x, std::initializer_list<std::size_t> axes);
Tensor slice(const Tensor& x, std::size_t axis, std::size_t from, std::size_t to);
Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis);
// Rows of x (axis 0) in the given order; indices may repeat.
Tensor index_select(const Tensor& x, std::span<const std::size_t> indices);

// Channel helpers over [B x C x H x W].
Tensor slice_channels(const Tensor& x, std::size_t from, std::size_t to);
Tensor concat_channels(std::span<const Tensor> parts);

// Scalar type of the products inside conv2d on the calling thread. Tensor
// storage and accumulation stay double either way.
enum class ConvPrecision { kFloat64, kFloat32 };
void set_conv_precision(ConvPrecision precision);
ConvPrecision conv_precision();

class ConvPrecisionScope {
 public:
  explicit ConvPrecisionScope(ConvPrecision precision) : previous_(conv_precision()) {
    set_conv_precision(precision);
  }
  ~ConvPrecisionScope() { set_conv_precision(previous_); }
  ConvPrecisionScope(const ConvPrecisionScope&) = delete;
  ConvPrecisionScope& operator=(const ConvPrecisionScope&) = delete;

 private:
  ConvPrecision previous_;
};

// Cross-correlation of [B x C x H x W] with [O x C x kh x kw] plus bias [O].
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b,
              std::size_t stride = 1, std::size_t pad = 0);

struct Window {
  std::size_t h = 1;
  std::size_t w = 1;
};

// Unpadded max pooling. Ties route the gradient to the first maximum in
// row-major window order.
Tensor maxpool2d(const Tensor& x, Window window, Window stride);

// [B x C x H x W] -> [B x C]
Tensor global_avg_pool(const Tensor& x);

// Normalizes over the last axis.
Tensor log_softmax(const Tensor& x);

// Solves A X = B for square A by LU with partial pivoting. Throws
// SingularMatrixError when a pivot falls below 1e-12 in magnitude.
Tensor solve_linear(const Tensor& a, const Tensor& b);

}  // namespace afdm
