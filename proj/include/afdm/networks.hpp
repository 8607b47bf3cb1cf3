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

#ifndef AFDM_NETWORKS_HPP_
#define AFDM_NETWORKS_HPP_

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "afdm/nn.hpp"
#include "afdm/ops.hpp"

namespace afdm {

/// Applied to the activation of the insertion layer (for example an AFDM).
using FeatureHook = std::function<Tensor(const Tensor&)>;

// Feed-forward trunk of named conv layers (each followed by ReLU) and pools,
// plus a network-specific head. A split index counts trunk stages.
class TaskNet {
 public:
  virtual ~TaskNet() = default;

  Tensor forward(const Tensor& images, const FeatureHook& hook = {}) const;
  Tensor forward_front(const Tensor& images, std::size_t cut) const;
  Tensor forward_back(const Tensor& features, std::size_t cut) const;

  // Index just past the named conv stage; ConfigError for unknown names.
  std::size_t cut_after(const std::string& layer) const;
  std::vector<std::string> conv_names() const;
  std::size_t conv_channels(const std::string& layer) const;

  const std::string& insertion_layer() const { return insertion_; }
  void set_insertion_layer(const std::string& layer);

  ParamList parameters() const;

 protected:
  struct Stage {
    std::string name;  // empty for pools
    Conv2d conv;
    Window window;  // used when name is empty
  };

  virtual void check_input(const Tensor& images) const = 0;
  virtual Tensor head(const Tensor& features) const = 0;
  virtual void collect_head(ParamList& out) const = 0;

  void add_conv(const std::string& name, std::size_t in, std::size_t out,
                std::size_t kernel, std::size_t pad, Rng& rng);
  void add_pool(Window window);

  std::vector<Stage> stages_;
  std::string insertion_;
};

struct NetworkSplit {
  const TaskNet* net = nullptr;
  std::size_t cut = 0;

  Tensor front(const Tensor& images) const { return net->forward_front(images, cut); }
  Tensor back(const Tensor& features) const { return net->forward_back(features, cut); }
};

NetworkSplit split_at(const TaskNet& net, const std::string& layer);

struct CrnnConfig {
  double width_factor = 0.25;
  std::size_t alphabet_size = 26;  // excluding the blank
  std::size_t lstm_hidden = 0;     // 0: scaled_width(256, width_factor)
  std::string insertion_layer = "conv4_1";
};

/// Input [B x 1 x 64 x W]; output [B x T x (alphabet_size + 1)] log-probabilities,
/// blank at index 0.
class Crnn : public TaskNet {
 public:
  Crnn(const CrnnConfig& cfg, Rng& rng);

  const CrnnConfig& config() const { return cfg_; }
  static std::size_t output_length(std::size_t width);

 protected:
  void check_input(const Tensor& images) const override;
  Tensor head(const Tensor& features) const override;
  void collect_head(ParamList& out) const override;

 private:
  CrnnConfig cfg_;
  Blstm lstm1_;
  Blstm lstm2_;
  Linear classifier_;
};

struct PhocNetConfig {
  double width_factor = 0.25;
  std::size_t phoc_dim = 0;
  std::vector<std::size_t> spp_levels{1, 2, 4};
  std::size_t fc_width = 0;  // 0: scaled_width(4096, width_factor)
  std::string insertion_layer = "conv4_1";
};

/// Input [B x 1 x H x W]; output [B x phoc_dim] logits.
class PhocNet : public TaskNet {
 public:
  PhocNet(const PhocNetConfig& cfg, Rng& rng);

  const PhocNetConfig& config() const { return cfg_; }

 protected:
  void check_input(const Tensor& images) const override;
  Tensor head(const Tensor& features) const override;
  void collect_head(ParamList& out) const override;

 private:
  PhocNetConfig cfg_;
  Linear fc1_;
  Linear fc2_;
  Linear fc3_;
};

/// Spatial pyramid max pooling; levels in the given order, cells row-major.
Tensor spp_pool(const Tensor& features, const std::vector<std::size_t>& levels);

}  // namespace afdm

#endif  // AFDM_NETWORKS_HPP_
