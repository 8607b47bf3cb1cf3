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

#include "afdm/afdm.hpp"

#include <cmath>

#include "afdm/error.hpp"
#include "afdm/ops.hpp"

namespace afdm {
namespace {

constexpr double kEdge = 1.0 - 1e-6;

ControlPoints nudged_base(std::size_t k) {
  ControlPoints base = base_control_points(k);
  for (auto& p : base.points) {
    for (double* v : {&p.x, &p.y}) {
      if (std::abs(*v) >= kEdge) *v = std::copysign(kEdge, *v);
    }
  }
  return base;
}

}  // namespace

std::vector<Tensor> partition_submaps(const Tensor& features, std::size_t k) {
  if (features.rank() != 4) {
    throw DimensionError("partition_submaps: expected [B x C x H x W], got " +
                         shape_str(features.shape()));
  }
  const std::size_t C = features.dim(1);
  if (k == 0 || C % k != 0) {
    throw ConfigError("partition_submaps: k=" + std::to_string(k) +
                      " does not divide C=" + std::to_string(C));
  }
  std::vector<Tensor> parts;
  const std::size_t step = C / k;
  for (std::size_t m = 0; m < k; ++m) {
    parts.push_back(k == 1 ? features : slice_channels(features, m * step, (m + 1) * step));
  }
  return parts;
}

LocalisationNet::LocalisationNet(std::size_t in_channels,
                                 const std::vector<std::size_t>& channels,
                                 std::size_t hidden, std::size_t outputs, Rng& rng) {
  if (channels.empty()) throw ConfigError("localisation net needs at least one conv layer");
  std::size_t in = in_channels;
  for (auto c : channels) {
    convs_.emplace_back(in, c, 3, 2, 1, rng);
    in = c;
  }
  fc1_ = Linear(in, hidden, rng);
  fc2_ = Linear(hidden, outputs, rng);
}

Tensor LocalisationNet::forward(const Tensor& x) const {
  if (x.rank() != 4 || x.dim(1) != in_channels()) {
    throw ConfigError("localisation net expects " + std::to_string(in_channels()) +
                      " input channels, got " + shape_str(x.shape()));
  }
  Tensor h = x;
  for (const auto& conv : convs_) h = relu(conv.forward(h));
  h = relu(fc1_.forward(global_avg_pool(h)));
  return tanh(fc2_.forward(h));
}

void LocalisationNet::collect(ParamList& out, const std::string& prefix) const {
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    convs_[i].collect(out, prefix + ".conv" + std::to_string(i + 1));
  }
  fc1_.collect(out, prefix + ".fc1");
  fc2_.collect(out, prefix + ".fc2");
}

Afdm::Afdm(const AfdmConfig& cfg, Rng& rng) : cfg_(cfg) {
  if (cfg.k == 0 || cfg.channels == 0 || cfg.channels % cfg.k != 0) {
    throw ConfigError("afdm: k=" + std::to_string(cfg.k) + " must divide C=" +
                      std::to_string(cfg.channels));
  }
  base_ = nudged_base(cfg.num_points);
  const std::size_t outputs = cfg.kind == WarpKind::kTps ? 2 * cfg.num_points : 6;
  loc_ = LocalisationNet(cfg.channels / cfg.k, cfg.loc_channels, cfg.loc_hidden, outputs, rng);
}

Tensor Afdm::predict(const Tensor& submap) const { return loc_.forward(submap); }

Tensor Afdm::predict_control_points(const Tensor& submap) const {
  if (cfg_.kind != WarpKind::kTps) {
    throw ConfigError("afdm: control points are only defined for TPS mode");
  }
  Tensor raw = predict(submap);
  return reshape(raw, {raw.dim(0), cfg_.num_points, 2});
}

SamplingGrid Afdm::sampling_grid(const Tensor& raw, std::size_t height, std::size_t width) const {
  if (cfg_.kind == WarpKind::kAffine) {
    return affine_grid(add(raw, Tensor({6}, {1, 0, 0, 0, 1, 0})), height, width);
  }
  std::shared_ptr<TpsGridGenerator> gen;
  {
    std::lock_guard<std::mutex> lock(cache_mutex_);
    auto& slot = generators_[{height, width}];
    if (!slot) slot = std::make_shared<TpsGridGenerator>(base_, height, width);
    gen = slot;
  }
  return gen->generate(reshape(raw, {raw.dim(0), cfg_.num_points, 2}));
}

Tensor Afdm::deform(const Tensor& features) const {
  auto parts = partition_submaps(features, cfg_.k);
  const std::size_t B = features.dim(0), H = features.dim(2), W = features.dim(3);
  Tensor stacked = cfg_.k == 1 ? parts.front() : concat(std::span<const Tensor>(parts), 0);
  Tensor warped = bilinear_sample(stacked, sampling_grid(predict(stacked), H, W));
  if (cfg_.k == 1) return warped;
  std::vector<Tensor> pieces;
  for (std::size_t m = 0; m < cfg_.k; ++m) pieces.push_back(slice(warped, 0, m * B, (m + 1) * B));
  return concat_channels(pieces);
}

void Afdm::init_identity() {
  Linear& out = loc_.output_layer();
  for (auto& v : out.weight.mutable_data()) v = 0.0;
  auto bias = out.bias.mutable_data();
  if (cfg_.kind == WarpKind::kAffine) {
    for (auto& v : bias) v = 0.0;
    return;
  }
  for (std::size_t i = 0; i < base_.size(); ++i) {
    const double xy[2] = {base_.points[i].x, base_.points[i].y};
    for (std::size_t d = 0; d < 2; ++d) {
      if (std::abs(xy[d]) >= 1.0) {
        throw ConfigError("afdm: base coordinate " + std::to_string(xy[d]) +
                          " has no finite atanh");
      }
      bias[2 * i + d] = std::atanh(xy[d]);
    }
  }
}

ParamList Afdm::parameters() const {
  ParamList out;
  loc_.collect(out, "afdm.loc");
  return out;
}

}  // namespace afdm
