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

#include "afdm/tps.hpp"

#include <cmath>
#include <memory>
#include <string>

#include "afdm/error.hpp"
#include "afdm/ops.hpp"

namespace afdm {

namespace {

double lattice_coord(std::size_t i, std::size_t n) {
  if (n == 1) return 0.0;
  return -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1);
}

Tensor lifted_lattice(const ControlPoints& base, std::size_t height,
                      std::size_t width) {
  const std::size_t k = base.size();
  const auto lattice = target_lattice(height, width);
  std::vector<double> values;
  values.reserve(lattice.size() * (k + 3));
  for (const auto& p : lattice) {
    const auto row = lift_point(p, base);
    values.insert(values.end(), row.begin(), row.end());
  }
  return Tensor({lattice.size(), k + 3}, std::move(values));
}

// [N x 2B] column pairs -> [B x N x 2]
SamplingGrid columns_to_grid(const Tensor& cols, std::size_t batch,
                             std::size_t height, std::size_t width) {
  const std::size_t n = height * width;
  auto grid = permute(reshape(cols, {n, batch, 2}), {1, 0, 2});
  return {height, width, grid};
}

}  // namespace

ControlPoints base_control_points(std::size_t k) {
  const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(k))));
  if (k < 4 || side * side != k) {
    throw ConfigError("base_control_points: K=" + std::to_string(k) +
                      " is not a perfect square >= 4");
  }
  ControlPoints cp;
  for (std::size_t r = 0; r < side; ++r) {
    for (std::size_t c = 0; c < side; ++c) {
      cp.points.push_back({lattice_coord(c, side), lattice_coord(r, side)});
    }
  }
  return cp;
}

double tps_kernel(double squared_distance) {
  if (squared_distance <= 0.0) return 0.0;
  return squared_distance * std::log(squared_distance);
}

Tensor build_delta(const ControlPoints& base) {
  const std::size_t k = base.size();
  const std::size_t n = k + 3;
  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    const auto& pi = base.points[i];
    d[i * n + 0] = 1.0;
    d[i * n + 1] = pi.x;
    d[i * n + 2] = pi.y;
    for (std::size_t j = 0; j < k; ++j) {
      const auto& pj = base.points[j];
      const double dx = pi.x - pj.x, dy = pi.y - pj.y;
      d[i * n + 3 + j] = tps_kernel(dx * dx + dy * dy);
    }
    d[k * n + 3 + i] = 1.0;
    d[(k + 1) * n + 3 + i] = pi.x;
    d[(k + 2) * n + 3 + i] = pi.y;
  }
  return Tensor({n, n}, std::move(d));
}

std::vector<double> lift_point(Point2 target, const ControlPoints& base) {
  std::vector<double> out;
  out.reserve(base.size() + 3);
  out.push_back(1.0);
  out.push_back(target.x);
  out.push_back(target.y);
  for (const auto& p : base.points) {
    const double dx = target.x - p.x, dy = target.y - p.y;
    out.push_back(tps_kernel(dx * dx + dy * dy));
  }
  return out;
}

std::vector<Point2> target_lattice(std::size_t height, std::size_t width) {
  std::vector<Point2> pts;
  pts.reserve(height * width);
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      pts.push_back({lattice_coord(c, width), lattice_coord(r, height)});
    }
  }
  return pts;
}

Tensor to_tensor(const ControlPoints& points) {
  std::vector<double> v;
  v.reserve(points.size() * 2);
  for (const auto& p : points.points) {
    v.push_back(p.x);
    v.push_back(p.y);
  }
  return Tensor({points.size(), 2}, std::move(v));
}

TpsTransform solve_tps(const Tensor& predicted, const ControlPoints& base) {
  const std::size_t k = base.size();
  if (predicted.rank() != 2 || predicted.dim(0) != k || predicted.dim(1) != 2) {
    throw ContractError("solve_tps: predicted points " +
                        shape_str(predicted.shape()) + " do not match " +
                        std::to_string(k) + " base points");
  }
  auto rhs = concat({predicted, Tensor::zeros({3, 2})}, 0);
  auto x = solve_linear(build_delta(base), rhs);
  return {permute(x, {1, 0}), base, predicted};
}

TpsTransform solve_tps(const ControlPoints& predicted, const ControlPoints& base) {
  return solve_tps(to_tensor(predicted), base);
}

SamplingGrid transform_grid(const TpsTransform& t, std::size_t height,
                            std::size_t width) {
  if (height == 0 || width == 0) {
    throw ContractError("transform_grid: empty target lattice");
  }
  auto lifted = lifted_lattice(t.base, height, width);
  // s_i = T . lift(s'_i) for every i, i.e. S = L T^T.
  auto cols = matmul(lifted, permute(t.matrix, {1, 0}));
  return columns_to_grid(cols, 1, height, width);
}

TpsGridGenerator::TpsGridGenerator(ControlPoints base, std::size_t height,
                                   std::size_t width)
    : base_(std::move(base)),
      height_(height),
      width_(width),
      delta_(build_delta(base_)),
      lifted_(lifted_lattice(base_, height, width)) {
  if (height == 0 || width == 0) {
    throw ContractError("TpsGridGenerator: empty target lattice");
  }
}

SamplingGrid TpsGridGenerator::generate(const Tensor& predicted) const {
  const std::size_t k = base_.size();
  if (predicted.rank() != 3 || predicted.dim(1) != k || predicted.dim(2) != 2) {
    throw ContractError("TpsGridGenerator: expected [B x " + std::to_string(k) +
                        " x 2], got " + shape_str(predicted.shape()));
  }
  const std::size_t batch = predicted.dim(0);
  // Column pair (2b, 2b+1) holds sample b's predicted x and y.
  auto rhs = reshape(permute(predicted, {1, 0, 2}), {k, 2 * batch});
  rhs = concat({rhs, Tensor::zeros({3, 2 * batch})}, 0);
  auto coeffs = solve_linear(delta_, rhs);
  return columns_to_grid(matmul(lifted_, coeffs), batch, height_, width_);
}

SamplingGrid affine_grid(const Tensor& params, std::size_t height,
                         std::size_t width) {
  if (height == 0 || width == 0) {
    throw ContractError("affine_grid: empty target lattice");
  }
  Tensor p = params;
  if (p.rank() == 1) p = reshape(p, {1, p.dim(0)});
  if (p.rank() != 2 || p.dim(1) != 6) {
    throw ContractError("affine_grid: expected [6] or [B x 6], got " +
                        shape_str(params.shape()));
  }
  const std::size_t batch = p.dim(0);
  const auto lattice = target_lattice(height, width);
  std::vector<double> hom;
  hom.reserve(lattice.size() * 3);
  for (const auto& q : lattice) {
    hom.push_back(q.x);
    hom.push_back(q.y);
    hom.push_back(1.0);
  }
  Tensor lifted({lattice.size(), 3}, std::move(hom));
  // [B x 2 x 3] -> [3 x B x 2] -> [3 x 2B]
  auto a = reshape(permute(reshape(p, {batch, 2, 3}), {2, 0, 1}), {3, 2 * batch});
  return columns_to_grid(matmul(lifted, a), batch, height, width);
}

Tensor bilinear_sample(const Tensor& features, const SamplingGrid& grid) {
  if (features.rank() != 4) {
    throw DimensionError("bilinear_sample: features must be [B x C x H x W], got " +
                         shape_str(features.shape()));
  }
  const std::size_t B = features.dim(0), C = features.dim(1);
  const std::size_t H = features.dim(2), W = features.dim(3);
  const std::size_t N = grid.height * grid.width;
  const Tensor& pts = grid.points;
  if (pts.rank() != 3 || pts.dim(1) != N || pts.dim(2) != 2) {
    throw ContractError("bilinear_sample: grid " + shape_str(pts.shape()) +
                        " does not match " + std::to_string(grid.height) + "x" +
                        std::to_string(grid.width));
  }
  const std::size_t GB = pts.dim(0);
  if (GB != 1 && GB != B) {
    throw ContractError("bilinear_sample: grid batch " + std::to_string(GB) +
                        " vs feature batch " + std::to_string(B));
  }
  const double sx = 0.5 * static_cast<double>(W - 1);
  const double sy = 0.5 * static_cast<double>(H - 1);

  // Per (sample, point): the four neighbor offsets (or npos) and weights.
  struct Tap {
    long x0, y0;
    double ax, ay;
  };
  auto taps = std::make_shared<std::vector<Tap>>(B * N);
  auto pv = pts.data();
  for (std::size_t b = 0; b < B; ++b) {
    const std::size_t gb = GB == 1 ? 0 : b;
    for (std::size_t n = 0; n < N; ++n) {
      double px = (pv[(gb * N + n) * 2] + 1.0) * sx;
      double py = (pv[(gb * N + n) * 2 + 1] + 1.0) * sy;
      // Far outside: every neighbor is padding.
      if (!(px > -1.0 && px < static_cast<double>(W) && py > -1.0 &&
            py < static_cast<double>(H))) {
        (*taps)[b * N + n] = {-2, -2, 0.0, 0.0};
        continue;
      }
      const double fx = std::floor(px), fy = std::floor(py);
      (*taps)[b * N + n] = {static_cast<long>(fx), static_cast<long>(fy),
                            px - fx, py - fy};
    }
  }
  auto fv = features.data();
  auto read = [W, H](std::span<const double> plane, long x, long y) {
    if (x < 0 || y < 0 || x >= static_cast<long>(W) || y >= static_cast<long>(H)) {
      return 0.0;
    }
    return plane[static_cast<std::size_t>(y) * W + static_cast<std::size_t>(x)];
  };
  std::vector<double> out(B * C * N);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < C; ++c) {
      auto plane = fv.subspan((b * C + c) * H * W, H * W);
      for (std::size_t n = 0; n < N; ++n) {
        const Tap& t = (*taps)[b * N + n];
        const double v00 = read(plane, t.x0, t.y0);
        const double v01 = read(plane, t.x0 + 1, t.y0);
        const double v10 = read(plane, t.x0, t.y0 + 1);
        const double v11 = read(plane, t.x0 + 1, t.y0 + 1);
        out[(b * C + c) * N + n] = (1 - t.ay) * ((1 - t.ax) * v00 + t.ax * v01) +
                                   t.ay * ((1 - t.ax) * v10 + t.ax * v11);
      }
    }
  }
  Tensor grid_points = pts;
  return make_result(
      {B, C, grid.height, grid.width}, std::move(out), {features, grid_points},
      [features, grid_points, taps, B, C, H, W, N, GB, sx, sy,
       read](const Tensor& o) mutable {
        auto g = o.grad_view();
        auto fv = features.data();
        const bool want_f = features.requires_grad();
        const bool want_p = grid_points.requires_grad();
        std::span<double> gf;
        std::span<double> gp;
        if (want_f) gf = features.mutable_grad();
        if (want_p) gp = grid_points.mutable_grad();
        auto put = [W, H](std::span<double> plane, long x, long y, double v) {
          if (x < 0 || y < 0 || x >= static_cast<long>(W) || y >= static_cast<long>(H)) {
            return;
          }
          plane[static_cast<std::size_t>(y) * W + static_cast<std::size_t>(x)] += v;
        };
        for (std::size_t b = 0; b < B; ++b) {
          const std::size_t gb = GB == 1 ? 0 : b;
          for (std::size_t c = 0; c < C; ++c) {
            auto plane = fv.subspan((b * C + c) * H * W, H * W);
            for (std::size_t n = 0; n < N; ++n) {
              const Tap& t = (*taps)[b * N + n];
              const double go = g[(b * C + c) * N + n];
              if (go == 0.0) continue;
              if (want_f) {
                auto gplane = gf.subspan((b * C + c) * H * W, H * W);
                put(gplane, t.x0, t.y0, go * (1 - t.ax) * (1 - t.ay));
                put(gplane, t.x0 + 1, t.y0, go * t.ax * (1 - t.ay));
                put(gplane, t.x0, t.y0 + 1, go * (1 - t.ax) * t.ay);
                put(gplane, t.x0 + 1, t.y0 + 1, go * t.ax * t.ay);
              }
              if (want_p) {
                const double v00 = read(plane, t.x0, t.y0);
                const double v01 = read(plane, t.x0 + 1, t.y0);
                const double v10 = read(plane, t.x0, t.y0 + 1);
                const double v11 = read(plane, t.x0 + 1, t.y0 + 1);
                const double dpx = (1 - t.ay) * (v01 - v00) + t.ay * (v11 - v10);
                const double dpy = (1 - t.ax) * (v10 - v00) + t.ax * (v11 - v01);
                gp[(gb * N + n) * 2] += go * dpx * sx;
                gp[(gb * N + n) * 2 + 1] += go * dpy * sy;
              }
            }
          }
        }
      });
}

}  // namespace afdm
