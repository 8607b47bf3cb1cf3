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

#include "afdm/nn.hpp"

#include <algorithm>
#include <cmath>

#include "afdm/error.hpp"
#include "afdm/ops.hpp"

namespace afdm {
namespace {

Tensor uniform(Shape shape, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor(std::move(shape), std::move(v), true);
}

}  // namespace

Rng make_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t salt) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return Rng(mix(mix(mix(seed) ^ stream) ^ salt));
}

std::size_t scaled_width(std::size_t n, double w) {
  if (!(w > 0.0) || w > 1.0) {
    throw ConfigError("width factor must lie in (0, 1], got " + std::to_string(w));
  }
  const double groups = std::round(static_cast<double>(n) * w / 4.0);
  return std::max<std::size_t>(4, 4 * static_cast<std::size_t>(groups));
}

Conv2d::Conv2d(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride_,
               std::size_t pad_, Rng& rng)
    : weight(uniform({out, in, kernel, kernel},
                     std::sqrt(6.0 / static_cast<double>(in * kernel * kernel)), rng)),
      bias(Tensor::zeros({out}, true)),
      stride(stride_),
      pad(pad_) {}

Tensor Conv2d::forward(const Tensor& x) const { return conv2d(x, weight, bias, stride, pad); }

void Conv2d::collect(ParamList& out, const std::string& prefix) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

Linear::Linear(std::size_t in, std::size_t out, Rng& rng)
    : weight(uniform({in, out}, std::sqrt(6.0 / static_cast<double>(in + out)), rng)),
      bias(Tensor::zeros({out}, true)) {}

Tensor Linear::forward(const Tensor& x) const { return add(matmul(x, weight), bias); }

void Linear::collect(ParamList& out, const std::string& prefix) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

LstmCell::LstmCell(std::size_t in, std::size_t hidden_, Rng& rng) : hidden(hidden_) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  w_input = uniform({in, 4 * hidden}, bound, rng);
  w_hidden = uniform({hidden, 4 * hidden}, bound, rng);
  std::vector<double> b(4 * hidden, 0.0);
  std::fill(b.begin() + static_cast<long>(hidden), b.begin() + static_cast<long>(2 * hidden), 1.0);
  bias = Tensor({4 * hidden}, std::move(b), true);
}

Tensor LstmCell::run(const Tensor& seq, bool reverse) const {
  if (seq.rank() != 3 || seq.dim(2) != w_input.dim(0)) {
    throw DimensionError("lstm: expected [B x T x " + std::to_string(w_input.dim(0)) +
                         "], got " + shape_str(seq.shape()));
  }
  const std::size_t B = seq.dim(0), T = seq.dim(1), h = hidden;
  // Input projections for every frame in one product.
  Tensor proj = reshape(add(matmul(reshape(seq, {B * T, seq.dim(2)}), w_input), bias),
                        {B, T, 4 * h});
  std::vector<Tensor> outputs(T);
  Tensor state_h = Tensor::zeros({B, h});
  Tensor state_c = Tensor::zeros({B, h});
  for (std::size_t step = 0; step < T; ++step) {
    const std::size_t t = reverse ? T - 1 - step : step;
    Tensor gates = reshape(slice(proj, 1, t, t + 1), {B, 4 * h});
    if (step > 0) gates = add(gates, matmul(state_h, w_hidden));
    Tensor i = sigmoid(slice(gates, 1, 0, h));
    Tensor f = sigmoid(slice(gates, 1, h, 2 * h));
    Tensor g = tanh(slice(gates, 1, 2 * h, 3 * h));
    Tensor o = sigmoid(slice(gates, 1, 3 * h, 4 * h));
    state_c = step > 0 ? add(mul(f, state_c), mul(i, g)) : mul(i, g);
    state_h = mul(o, tanh(state_c));
    outputs[t] = reshape(state_h, {B, 1, h});
  }
  return concat(std::span<const Tensor>(outputs), 1);
}

void LstmCell::collect(ParamList& out, const std::string& prefix) const {
  out.push_back({prefix + ".w_input", w_input});
  out.push_back({prefix + ".w_hidden", w_hidden});
  out.push_back({prefix + ".bias", bias});
}

Blstm::Blstm(std::size_t in, std::size_t hidden, Rng& rng)
    : fwd(in, hidden, rng), bwd(in, hidden, rng) {}

Tensor Blstm::forward(const Tensor& seq) const {
  return concat({fwd.run(seq, false), bwd.run(seq, true)}, 2);
}

void Blstm::collect(ParamList& out, const std::string& prefix) const {
  fwd.collect(out, prefix + ".fwd");
  bwd.collect(out, prefix + ".bwd");
}

}  // namespace afdm
