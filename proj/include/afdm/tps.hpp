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
#include <vector>

#include "afdm/tensor.hpp"

// Thin-plate-spline and affine sampling grids plus a differentiable bilinear
// sampler. Coordinates are normalized to [-1, 1] on both axes; a grid maps
// every target position to the source position it samples from.
namespace afdm {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

struct ControlPoints {
  std::vector<Point2> points;

  std::size_t size() const { return points.size(); }
};

// sqrt(K) x sqrt(K) uniform lattice over [-1, 1]^2, row-major (y outer).
// Throws ConfigError unless K is a perfect square >= 4.
ControlPoints base_control_points(std::size_t k);

// Radial basis d^2 ln d^2 evaluated from the squared distance; zero at 0.
double tps_kernel(double squared_distance);

// The constant (K+3) x (K+3) system matrix of the base points:
//   [ 1  P'^T  E ]
//   [ 0  0     1 ]
//   [ 0  0     P']
// with E_ij = kernel(|p'_i - p'_j|^2).
Tensor build_delta(const ControlPoints& base);

// [1, x, y, kernel(d_1), ..., kernel(d_K)] for one target point.
std::vector<double> lift_point(Point2 target, const ControlPoints& base);

// Row-major H x W lattice over [-1, 1]^2; a single row or column sits at 0.
std::vector<Point2> target_lattice(std::size_t height, std::size_t width);

struct TpsTransform {
  Tensor matrix;             // 2 x (K+3)
  ControlPoints base;        // P'
  Tensor predicted;          // P, K x 2
};

// Source positions for an H_out x W_out target lattice, one set per sample.
struct SamplingGrid {
  std::size_t height = 0;
  std::size_t width = 0;
  Tensor points;  // [B x N x 2], (x, y) per target position

  std::size_t batch() const { return points.dim(0); }
};

Tensor to_tensor(const ControlPoints& points);  // K x 2

// Fits the transform that carries every base point p'_k onto p_k.
// Throws ContractError on a size mismatch and SingularMatrixError when the
// base points are degenerate.
TpsTransform solve_tps(const Tensor& predicted, const ControlPoints& base);
TpsTransform solve_tps(const ControlPoints& predicted, const ControlPoints& base);

SamplingGrid transform_grid(const TpsTransform& t, std::size_t height,
                            std::size_t width);

// Batched grid generation for a fixed base and lattice: one transform per
// sample of `predicted` ([B x K x 2]).
class TpsGridGenerator {
 public:
  TpsGridGenerator(ControlPoints base, std::size_t height, std::size_t width);

  SamplingGrid generate(const Tensor& predicted) const;

  const ControlPoints& base() const { return base_; }

 private:
  ControlPoints base_;
  std::size_t height_;
  std::size_t width_;
  Tensor delta_;   // (K+3) x (K+3)
  Tensor lifted_;  // N x (K+3)
};

// params: [6] or [B x 6], row-major 2 x 3 matrices [a b tx; c d ty].
SamplingGrid affine_grid(const Tensor& params, std::size_t height,
                         std::size_t width);

// Samples [B x C x H x W] at the grid positions. Pixel coordinates are
// x_pix = (x + 1)(W - 1) / 2 (likewise for y); neighbors outside the map read
// as zero. A grid with batch 1 is shared by all samples.
Tensor bilinear_sample(const Tensor& features, const SamplingGrid& grid);

}  // namespace afdm
