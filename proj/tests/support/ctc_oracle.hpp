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

// Exhaustive CTC oracle: sums the probability of every frame labelling that
// collapses to the target. Only usable for tiny T and alphabets.

#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace afdm::testing {

inline std::vector<std::size_t> collapse(const std::vector<std::size_t>& path) {
  std::vector<std::size_t> out;
  std::size_t prev = 0;
  for (auto l : path) {
    if (l != 0 && l != prev) out.push_back(l);
    prev = l;
  }
  return out;
}

// logprobs: T x C row-major.
inline double brute_force_ctc(const std::vector<double>& logprobs, std::size_t T,
                              std::size_t C, const std::vector<std::size_t>& target) {
  std::vector<std::size_t> path(T, 0);
  double total = 0.0;
  while (true) {
    if (collapse(path) == target) {
      double lp = 0.0;
      for (std::size_t t = 0; t < T; ++t) lp += logprobs[t * C + path[t]];
      total += std::exp(lp);
    }
    std::size_t t = 0;
    while (t < T && ++path[t] == C) path[t++] = 0;
    if (t == T) break;
  }
  return -std::log(total);
}

}  // namespace afdm::testing
