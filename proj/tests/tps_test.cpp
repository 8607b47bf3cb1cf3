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

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "afdm/error.hpp"
#include "afdm/ops.hpp"
#include "afdm/tps.hpp"
#include "support/gradcheck.hpp"

namespace afdm {
namespace {

using testing::grad_check;
using testing::random_tensor;

ControlPoints random_points(std::size_t k, std::mt19937_64& rng, double r = 1.0) {
  std::uniform_real_distribution<double> d(-r, r);
  ControlPoints cp;
  for (std::size_t i = 0; i < k; ++i) cp.points.push_back({d(rng), d(rng)});
  return cp;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

std::vector<double> lattice_values(std::size_t h, std::size_t w) {
  std::vector<double> v;
  for (const auto& p : target_lattice(h, w)) {
    v.push_back(p.x);
    v.push_back(p.y);
  }
  return v;
}

bool has_point(const ControlPoints& cp, double x, double y) {
  for (const auto& p : cp.points) {
    if (p.x == x && p.y == y) return true;
  }
  return false;
}

TEST(BaseControlPoints, NineAndFourPointGrids) {
  auto nine = base_control_points(9);
  ASSERT_EQ(nine.size(), 9u);
  EXPECT_TRUE(has_point(nine, -1, -1));
  EXPECT_TRUE(has_point(nine, 0, 0));
  EXPECT_TRUE(has_point(nine, 1, 1));
  for (std::size_t i = 0; i < 9; ++i) {
    for (std::size_t j = i + 1; j < 9; ++j) {
      EXPECT_FALSE(nine.points[i].x == nine.points[j].x &&
                   nine.points[i].y == nine.points[j].y);
    }
  }
  auto four = base_control_points(4);
  ASSERT_EQ(four.size(), 4u);
  for (double x : {-1.0, 1.0}) {
    for (double y : {-1.0, 1.0}) EXPECT_TRUE(has_point(four, x, y));
  }
  EXPECT_THROW(base_control_points(8), ConfigError);
  EXPECT_THROW(base_control_points(1), ConfigError);
}

TEST(Delta, BlockLayout) {
  auto base = base_control_points(9);
  auto d = build_delta(base);
  ASSERT_EQ(d.shape(), (Shape{12, 12}));
  for (std::size_t i = 0; i < 9; ++i) {
    EXPECT_EQ(d.at({i, 3 + i}), 0.0);
    EXPECT_EQ(d.at({i, 0}), 1.0);
    EXPECT_EQ(d.at({9, 3 + i}), 1.0);
    for (std::size_t j = 0; j < 9; ++j) EXPECT_EQ(d.at({i, 3 + j}), d.at({j, 3 + i}));
  }
  for (std::size_t r = 9; r < 12; ++r) {
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(d.at({r, c}), 0.0);
  }
  // (-1,-1) and (0,-1) are one unit apart: kernel(1) = 1 * ln 1 = 0.
  EXPECT_EQ(d.at({0, 3 + 1}), 0.0);
  EXPECT_DOUBLE_EQ(d.at({0, 3 + 2}), 4.0 * std::log(4.0));
}

TEST(Delta, ShapeForAnyK) {
  for (std::size_t k : {4u, 9u, 16u, 25u}) {
    auto d = build_delta(base_control_points(k));
    EXPECT_EQ(d.shape(), (Shape{k + 3, k + 3}));
  }
}

TEST(LiftPoint, HandEvaluation) {
  ControlPoints one{{{1.0, 0.0}}};
  EXPECT_EQ(lift_point({0, 0}, one), (std::vector<double>{1, 0, 0, 0}));
  auto base = base_control_points(9);
  auto v = lift_point(base.points[4], base);
  ASSERT_EQ(v.size(), 12u);
  EXPECT_EQ(v[3 + 4], 0.0);
}

TEST(SolveTps, IdentityWhenPredictedEqualsBase) {
  auto base = base_control_points(9);
  auto t = solve_tps(base, base);
  auto grid = transform_grid(t, 5, 7);
  EXPECT_LE(max_abs_diff(grid.points.data(), lattice_values(5, 7)), 1e-12);
}

TEST(SolveTps, TranslationShiftsEveryPoint) {
  auto base = base_control_points(9);
  auto moved = base;
  for (auto& p : moved.points) p.x += 0.1;
  auto grid = transform_grid(solve_tps(moved, base), 4, 6);
  auto lat = lattice_values(4, 6);
  for (std::size_t i = 0; i < lat.size(); i += 2) lat[i] += 0.1;
  EXPECT_LE(max_abs_diff(grid.points.data(), lat), 1e-12);
}

TEST(SolveTps, InterpolatesRandomPairs) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    auto base = random_points(9, rng);
    auto pred = random_points(9, rng);
    auto t = solve_tps(pred, base);
    ASSERT_EQ(t.matrix.shape(), (Shape{2, 12}));
    for (std::size_t k = 0; k < 9; ++k) {
      auto lifted = lift_point(base.points[k], base);
      double sx = 0, sy = 0;
      for (std::size_t j = 0; j < 12; ++j) {
        sx += t.matrix.at({0, j}) * lifted[j];
        sy += t.matrix.at({1, j}) * lifted[j];
      }
      EXPECT_LE(std::abs(sx - pred.points[k].x), 1e-9);
      EXPECT_LE(std::abs(sy - pred.points[k].y), 1e-9);
    }
  }
}

TEST(SolveTps, AffineReproduction) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> d(-0.5, 0.5);
  for (int trial = 0; trial < 20; ++trial) {
    auto base = random_points(9, rng);
    const double a = 1 + d(rng), b = d(rng), c = d(rng), e = 1 + d(rng);
    const double tx = d(rng), ty = d(rng);
    auto pred = base;
    for (auto& p : pred.points) p = {a * p.x + b * p.y + tx, c * p.x + e * p.y + ty};
    auto grid = transform_grid(solve_tps(pred, base), 6, 9);
    auto lat = target_lattice(6, 9);
    auto gv = grid.points.data();
    for (std::size_t i = 0; i < lat.size(); ++i) {
      EXPECT_NEAR(gv[2 * i], a * lat[i].x + b * lat[i].y + tx, 1e-8);
      EXPECT_NEAR(gv[2 * i + 1], c * lat[i].x + e * lat[i].y + ty, 1e-8);
    }
  }
}

TEST(SolveTps, Errors) {
  auto base = base_control_points(9);
  EXPECT_THROW(solve_tps(base_control_points(4), base), ContractError);
  ControlPoints line;
  for (int i = 0; i < 4; ++i) line.points.push_back({0.2 * i, 0.2 * i});
  EXPECT_THROW(solve_tps(line, line), SingularMatrixError);
}

TEST(TransformGrid, SizeOrderAndDegenerateAxis) {
  auto base = base_control_points(4);
  auto grid = transform_grid(solve_tps(base, base), 3, 4);
  EXPECT_EQ(grid.points.shape(), (Shape{1, 12, 2}));
  // Row-major: x varies fastest.
  EXPECT_NEAR(grid.points.at({0, 1, 0}), -1.0 / 3.0, 1e-12);
  EXPECT_NEAR(grid.points.at({0, 4, 1}), 0.0, 1e-12);

  auto row = transform_grid(solve_tps(base, base), 1, 3);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(row.points.at({0, i, 1}), 0.0, 1e-12);
}

TEST(GridGenerator, MatchesPerSampleTransform) {
  std::mt19937_64 rng(13);
  auto base = base_control_points(9);
  auto p0 = random_points(9, rng, 0.9), p1 = random_points(9, rng, 0.9);
  TpsGridGenerator gen(base, 4, 5);
  auto batch = concat({reshape(to_tensor(p0), {1, 9, 2}), reshape(to_tensor(p1), {1, 9, 2})}, 0);
  auto grid = gen.generate(batch);
  ASSERT_EQ(grid.points.shape(), (Shape{2, 20, 2}));
  auto g0 = transform_grid(solve_tps(p0, base), 4, 5);
  auto g1 = transform_grid(solve_tps(p1, base), 4, 5);
  auto gv = grid.points.data();
  EXPECT_LE(max_abs_diff(gv.subspan(0, 40), g0.points.data()), 1e-12);
  EXPECT_LE(max_abs_diff(gv.subspan(40, 40), g1.points.data()), 1e-12);
}

TEST(BilinearSample, LatticeGridIsIdentity) {
  std::mt19937_64 rng(14);
  auto f = random_tensor({2, 3, 4, 5}, rng, -1, 1, false);
  SamplingGrid grid{4, 5, Tensor({1, 20, 2}, lattice_values(4, 5))};
  auto out = bilinear_sample(f, grid);
  ASSERT_EQ(out.shape(), f.shape());
  EXPECT_LE(max_abs_diff(out.data(), f.data()), 1e-15);
}

TEST(BilinearSample, MidpointAveragesNeighbors) {
  Tensor f({1, 1, 1, 2}, {3.0, 7.0});
  SamplingGrid grid{1, 1, Tensor({1, 1, 2}, {0.0, 0.0})};
  EXPECT_DOUBLE_EQ(bilinear_sample(f, grid).item(), 5.0);
}

TEST(BilinearSample, FarOutsideIsZero) {
  auto f = Tensor::full({1, 2, 3, 3}, 4.0);
  SamplingGrid grid{2, 2, Tensor::full({1, 4, 2}, -5.0)};
  auto out = bilinear_sample(f, grid);
  for (double v : out.data()) EXPECT_EQ(v, 0.0);
}

TEST(BilinearSample, ConstantMapStaysConstant) {
  std::mt19937_64 rng(15);
  auto f = Tensor::full({1, 2, 6, 8}, 0.37);
  auto pts = random_tensor({1, 30, 2}, rng, -1, 1, false);
  auto out = bilinear_sample(f, {5, 6, pts});
  for (double v : out.data()) EXPECT_NEAR(v, 0.37, 1e-15);
}

TEST(AffineGrid, IdentityShiftAndScale) {
  auto id = affine_grid(Tensor({6}, {1, 0, 0, 0, 1, 0}), 3, 4);
  EXPECT_LE(max_abs_diff(id.points.data(), lattice_values(3, 4)), 1e-15);

  auto shift = affine_grid(Tensor({6}, {1, 0, 0.5, 0, 1, 0}), 3, 4);
  auto lat = lattice_values(3, 4);
  for (std::size_t i = 0; i < lat.size(); i += 2) lat[i] += 0.5;
  EXPECT_LE(max_abs_diff(shift.points.data(), lat), 1e-15);

  auto half = affine_grid(Tensor({6}, {0.5, 0, 0, 0, 0.5, 0}), 3, 4);
  auto l2 = lattice_values(3, 4);
  for (auto& v : l2) v *= 0.5;
  EXPECT_LE(max_abs_diff(half.points.data(), l2), 1e-15);
}

TEST(AffineGrid, BatchedParameters) {
  Tensor params({2, 6}, {1, 0, 0, 0, 1, 0, 1, 0, 0.25, 0, 1, -0.5});
  auto grid = affine_grid(params, 2, 3);
  ASSERT_EQ(grid.points.shape(), (Shape{2, 6, 2}));
  EXPECT_NEAR(grid.points.at({1, 0, 0}), -0.75, 1e-15);
  EXPECT_NEAR(grid.points.at({1, 0, 1}), -1.5, 1e-15);
}

TEST(Gradients, SampleOutputWrtPredictedPoints) {
  auto base = base_control_points(9);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(300 + seed);
    auto f = random_tensor({1, 2, 5, 7}, rng, -1, 1, false);
    auto w = random_tensor({1, 2, 4, 6}, rng, -1, 1, false);
    auto pred = to_tensor(base);
    std::uniform_real_distribution<double> jitter(-0.15, 0.15);
    for (auto& v : pred.mutable_data()) v = v * 0.9 + jitter(rng);
    pred.set_requires_grad(true);
    auto r = grad_check(
        [&] {
          auto grid = transform_grid(solve_tps(pred, base), 4, 6);
          return sum(mul(bilinear_sample(f, grid), w));
        },
        {pred}, 1000, 1e-6);
    EXPECT_LE(r.max_rel_err, 1e-4) << "seed " << seed << ": " << r.worst;
  }
}

TEST(Gradients, SampleOutputWrtFeaturesAndAffine) {
  std::mt19937_64 rng(16);
  auto f = random_tensor({2, 2, 5, 6}, rng);
  auto w = random_tensor({2, 2, 3, 4}, rng, -1, 1, false);
  auto params = Tensor({2, 6}, {0.9, 0.1, 0.05, -0.1, 1.1, 0.02, 1.05, -0.07, -0.1, 0.03, 0.8, 0.11}, true);
  auto r = grad_check(
      [&] { return sum(mul(bilinear_sample(f, affine_grid(params, 3, 4)), w)); },
      {f, params}, 1000, 1e-6);
  EXPECT_LE(r.max_rel_err, 1e-4) << r.worst;
}

}  // namespace
}  // namespace afdm
