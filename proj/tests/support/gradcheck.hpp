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

// Central finite-difference oracle used by the gradient tests. It evaluates
// the loss with recording disabled, so it never touches the analytic path.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "afdm/tensor.hpp"

namespace afdm::testing {

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::size_t checked = 0;
  std::string worst;
};

inline double rel_err(double analytic, double numeric, double floor = 1e-6) {
  const double den = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / den;
}

// `loss_fn` must build the loss from the current parameter values. Up to
// `per_tensor` coordinates of every tensor are compared (all of them when the
// tensor is smaller). `fourth_order` switches to the five-point stencil.
inline GradCheckResult grad_check(const std::function<Tensor()>& loss_fn,
                                  std::vector<Tensor> params,
                                  std::size_t per_tensor = 1000,
                                  double h = 1e-5, std::uint64_t seed = 7,
                                  double floor = 1e-6, bool fourth_order = false) {
  for (auto& p : params) {
    p.mutable_grad();
    p.zero_grad();
  }
  Tape tape;
  Tensor loss;
  {
    TapeScope scope(tape);
    loss = loss_fn();
  }
  tape.backward(loss);
  std::vector<std::vector<double>> analytic;
  for (auto& p : params) analytic.push_back(p.grad());

  auto eval = [&] {
    NoGradScope off;
    return loss_fn().item();
  };
  std::mt19937_64 rng(seed);
  GradCheckResult result;
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto values = params[t].mutable_data();
    std::vector<std::size_t> coords(values.size());
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    if (coords.size() > per_tensor) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(per_tensor);
    }
    for (std::size_t i : coords) {
      const double saved = values[i];
      auto at = [&](double offset) {
        values[i] = saved + offset;
        return eval();
      };
      const double d1 = at(h) - at(-h);
      double numeric = d1 / (2.0 * h);
      if (fourth_order) numeric = (8.0 * d1 - (at(2 * h) - at(-2 * h))) / (12.0 * h);
      values[i] = saved;
      const double err = rel_err(analytic[t][i], numeric, floor);
      ++result.checked;
      if (err > result.max_rel_err) {
        result.max_rel_err = err;
        result.worst = "tensor " + std::to_string(t) + " coord " +
                       std::to_string(i) + ": analytic " +
                       std::to_string(analytic[t][i]) + " numeric " +
                       std::to_string(numeric);
      }
    }
  }
  return result;
}

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0,
                            double hi = 1.0, bool requires_grad = true) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

}  // namespace afdm::testing
