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

#ifndef AFDM_NN_HPP_
#define AFDM_NN_HPP_

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "afdm/optim.hpp"
#include "afdm/tensor.hpp"

namespace afdm {

using Rng = std::mt19937_64;

/// Independent generator for (seed, stream, salt), mixed with splitmix64.
Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0, std::uint64_t salt = 0);

/// Channel count for a layer of nominal width `n` under width-factor `w`:
/// a multiple of 4, never below 4.
std::size_t scaled_width(std::size_t n, double w);

struct Conv2d {
  Conv2d() = default;
  Conv2d(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride,
         std::size_t pad, Rng& rng);

  Tensor forward(const Tensor& x) const;
  void collect(ParamList& out, const std::string& prefix) const;

  Tensor weight;  // out x in x k x k
  Tensor bias;
  std::size_t stride = 1;
  std::size_t pad = 0;
};

struct Linear {
  Linear() = default;
  Linear(std::size_t in, std::size_t out, Rng& rng);

  // x: [N x in] -> [N x out]
  Tensor forward(const Tensor& x) const;
  void collect(ParamList& out, const std::string& prefix) const;

  Tensor weight;  // in x out
  Tensor bias;
};

// One direction of an LSTM. Gate order in the packed weights: i, f, g, o.
struct LstmCell {
  LstmCell() = default;
  LstmCell(std::size_t in, std::size_t hidden, Rng& rng);

  // seq: [B x T x in] -> [B x T x hidden]
  Tensor run(const Tensor& seq, bool reverse) const;
  void collect(ParamList& out, const std::string& prefix) const;

  std::size_t hidden = 0;
  Tensor w_input;   // in x 4h
  Tensor w_hidden;  // h x 4h
  Tensor bias;      // 4h, forget slice initialised to 1
};

struct Blstm {
  Blstm() = default;
  Blstm(std::size_t in, std::size_t hidden, Rng& rng);

  // [B x T x in] -> [B x T x 2*hidden]
  Tensor forward(const Tensor& seq) const;
  void collect(ParamList& out, const std::string& prefix) const;

  LstmCell fwd;
  LstmCell bwd;
};

}  // namespace afdm

#endif  // AFDM_NN_HPP_
