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

#include "afdm/optim.hpp"

#include <cmath>

#include "afdm/error.hpp"

namespace afdm {

void zero_grads(ParamList& params) {
  for (auto& p : params) {
    p.tensor.mutable_grad();
    p.tensor.zero_grad();
  }
}

void set_requires_grad(ParamList& params, bool on) {
  for (auto& p : params) p.tensor.set_requires_grad(on);
}

void adam_step(ParamList& params, AdamState& state, Direction direction) {
  for (const auto& p : params) {
    if (!p.tensor.has_grad()) {
      throw ContractError("adam_step: parameter '" + p.name + "' has no gradient");
    }
  }
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.tensor.numel(), 0.0);
      state.v.emplace_back(p.tensor.numel(), 0.0);
    }
  }
  if (state.m.size() != params.size()) {
    throw ContractError("adam_step: state tracks " + std::to_string(state.m.size()) +
                        " parameters, got " + std::to_string(params.size()));
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  const double sign = direction == Direction::kAscent ? -1.0 : 1.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto value = params[i].tensor.mutable_data();
    auto grad = params[i].tensor.grad_view();
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (m.size() != value.size()) {
      throw ContractError("adam_step: moment shape mismatch for '" +
                          params[i].name + "'");
    }
    for (std::size_t k = 0; k < value.size(); ++k) {
      const double g = sign * grad[k];
      m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * g;
      v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * g * g;
      const double mh = m[k] / c1;
      const double vh = v[k] / c2;
      value[k] -= state.lr * mh / (std::sqrt(vh) + state.epsilon);
    }
  }
}

}  // namespace afdm
