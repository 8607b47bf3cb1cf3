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

#ifndef AFDM_AFDM_HPP_
#define AFDM_AFDM_HPP_

#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <utility>
#include <vector>

#include "afdm/nn.hpp"
#include "afdm/tps.hpp"

namespace afdm {

enum class WarpKind { kTps, kAffine };

struct AfdmConfig {
  std::size_t channels = 0;  // C of the feature map being deformed
  std::size_t k = 4;         // sub-map divisions
  std::size_t num_points = 9;
  WarpKind kind = WarpKind::kTps;
  std::vector<std::size_t> loc_channels{32, 64, 128, 128};
  std::size_t loc_hidden = 64;
};

/// Split F [B x C x H x W] into k consecutive channel slices.
std::vector<Tensor> partition_submaps(const Tensor& features, std::size_t k);

/// Stride-2 conv stack, global average pool, then two fully-connected layers
/// with a tanh output.
class LocalisationNet {
 public:
  LocalisationNet() = default;
  LocalisationNet(std::size_t in_channels, const std::vector<std::size_t>& channels,
                  std::size_t hidden, std::size_t outputs, Rng& rng);

  Tensor forward(const Tensor& x) const;  // [B x in x H x W] -> [B x outputs]
  void collect(ParamList& out, const std::string& prefix) const;

  std::size_t in_channels() const { return convs_.front().weight.dim(1); }
  Linear& output_layer() { return fc2_; }

 private:
  std::vector<Conv2d> convs_;
  Linear fc1_;
  Linear fc2_;
};

class Afdm {
 public:
  Afdm(const AfdmConfig& cfg, Rng& rng);

  const AfdmConfig& config() const { return cfg_; }
  const ControlPoints& base_points() const { return base_; }

  /// Raw localisation outputs for one sub-map batch: [B x 2K] for TPS,
  /// [B x 6] offsets from the identity for affine.
  Tensor predict(const Tensor& submap) const;
  /// Predicted control points [B x K x 2] for TPS mode.
  Tensor predict_control_points(const Tensor& submap) const;

  /// Warp every sub-map with its own predicted transform and reassemble.
  Tensor deform(const Tensor& features) const;

  /// Zero the output weights and set the output bias so the module starts
  /// at the identity warp.
  void init_identity();

  /// Sampling grid for raw localisation outputs (as returned by predict).
  SamplingGrid sampling_grid(const Tensor& raw, std::size_t height, std::size_t width) const;

  ParamList parameters() const;

 private:

  AfdmConfig cfg_;
  ControlPoints base_;
  LocalisationNet loc_;
  mutable std::mutex cache_mutex_;
  mutable std::map<std::pair<std::size_t, std::size_t>, std::shared_ptr<TpsGridGenerator>>
      generators_;
};

}  // namespace afdm

#endif  // AFDM_AFDM_HPP_
