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

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "afdm/tensor.hpp"

namespace afdm {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

using ParamList = std::vector<NamedTensor>;

void zero_grads(ParamList& params);
void set_requires_grad(ParamList& params, bool on);

enum class Direction { kDescent, kAscent };

// Moment buffers and hyper-parameters of one Adam optimizer. Buffers are
// created lazily on the first step and are parallel to the parameter list.
struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

// One bias-corrected Adam update. kAscent moves along +grad, which is Adam on
// the negated gradient. Throws ContractError if a parameter has no gradient.
void adam_step(ParamList& params, AdamState& state,
               Direction direction = Direction::kDescent);

}  // namespace afdm
