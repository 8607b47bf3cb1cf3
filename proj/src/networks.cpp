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

#include "afdm/networks.hpp"

#include <cmath>
#include <memory>

#include "afdm/error.hpp"

namespace afdm {

void TaskNet::add_conv(const std::string& name, std::size_t in, std::size_t out,
                       std::size_t kernel, std::size_t pad, Rng& rng) {
  stages_.push_back({name, Conv2d(in, out, kernel, 1, pad, rng), {}});
}

void TaskNet::add_pool(Window window) { stages_.push_back({"", Conv2d(), window}); }

Tensor TaskNet::forward_front(const Tensor& images, std::size_t cut) const {
  check_input(images);
  Tensor x = images;
  for (std::size_t s = 0; s < cut; ++s) {
    const Stage& st = stages_[s];
    x = st.name.empty() ? maxpool2d(x, st.window, st.window) : relu(st.conv.forward(x));
  }
  return x;
}

Tensor TaskNet::forward_back(const Tensor& features, std::size_t cut) const {
  Tensor x = features;
  for (std::size_t s = cut; s < stages_.size(); ++s) {
    const Stage& st = stages_[s];
    x = st.name.empty() ? maxpool2d(x, st.window, st.window) : relu(st.conv.forward(x));
  }
  return head(x);
}

Tensor TaskNet::forward(const Tensor& images, const FeatureHook& hook) const {
  if (!hook) return forward_back(forward_front(images, 0), 0);
  const std::size_t cut = cut_after(insertion_);
  return forward_back(hook(forward_front(images, cut)), cut);
}

std::size_t TaskNet::cut_after(const std::string& layer) const {
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    if (stages_[s].name == layer) return s + 1;
  }
  throw ConfigError("unknown layer '" + layer + "'");
}

std::vector<std::string> TaskNet::conv_names() const {
  std::vector<std::string> names;
  for (const auto& st : stages_) {
    if (!st.name.empty()) names.push_back(st.name);
  }
  return names;
}

std::size_t TaskNet::conv_channels(const std::string& layer) const {
  return stages_[cut_after(layer) - 1].conv.weight.dim(0);
}

void TaskNet::set_insertion_layer(const std::string& layer) {
  cut_after(layer);
  insertion_ = layer;
}

ParamList TaskNet::parameters() const {
  ParamList out;
  for (const auto& st : stages_) {
    if (!st.name.empty()) st.conv.collect(out, st.name);
  }
  collect_head(out);
  return out;
}

NetworkSplit split_at(const TaskNet& net, const std::string& layer) {
  return {&net, net.cut_after(layer)};
}

Crnn::Crnn(const CrnnConfig& cfg, Rng& rng) : cfg_(cfg) {
  const double w = cfg.width_factor;
  const std::size_t c1 = scaled_width(64, w), c2 = scaled_width(128, w);
  const std::size_t c3 = scaled_width(256, w), c4 = scaled_width(512, w);
  const Window half{2, 2}, rows{2, 1};
  add_conv("conv1", 1, c1, 3, 1, rng);
  add_pool(half);
  add_conv("conv2", c1, c2, 3, 1, rng);
  add_pool(half);
  add_conv("conv3_1", c2, c3, 3, 1, rng);
  add_conv("conv3_2", c3, c3, 3, 1, rng);
  add_pool(rows);
  add_conv("conv4_1", c3, c4, 3, 1, rng);
  add_conv("conv4_2", c4, c4, 3, 1, rng);
  add_pool(rows);
  add_conv("conv5_1", c4, c4, 3, 1, rng);
  add_conv("conv5_2", c4, c4, 3, 1, rng);
  add_pool(rows);
  add_conv("conv6", c4, c4, 2, 0, rng);
  const std::size_t h = cfg.lstm_hidden ? cfg.lstm_hidden : scaled_width(256, w);
  lstm1_ = Blstm(c4, h, rng);
  lstm2_ = Blstm(2 * h, h, rng);
  classifier_ = Linear(2 * h, cfg.alphabet_size + 1, rng);
  set_insertion_layer(cfg.insertion_layer);
}

std::size_t Crnn::output_length(std::size_t width) {
  const std::size_t w = width / 2 / 2;
  return w >= 2 ? w - 1 : 0;
}

void Crnn::check_input(const Tensor& images) const {
  if (images.rank() != 4 || images.dim(1) != 1 || images.dim(2) != 64) {
    throw ContractError("crnn: expected [B x 1 x 64 x W] input, got " +
                        shape_str(images.shape()));
  }
  if (output_length(images.dim(3)) == 0) {
    throw ContractError("crnn: input width " + std::to_string(images.dim(3)) +
                        " is too narrow");
  }
}

Tensor Crnn::head(const Tensor& features) const {
  const std::size_t B = features.dim(0), C = features.dim(1), T = features.dim(3);
  if (features.dim(2) != 1) {
    throw ContractError("crnn: map-to-sequence needs height 1, got " +
                        shape_str(features.shape()));
  }
  Tensor seq = permute(reshape(features, {B, C, T}), {0, 2, 1});
  seq = lstm2_.forward(lstm1_.forward(seq));
  Tensor logits = classifier_.forward(reshape(seq, {B * T, seq.dim(2)}));
  return reshape(log_softmax(logits), {B, T, cfg_.alphabet_size + 1});
}

void Crnn::collect_head(ParamList& out) const {
  lstm1_.collect(out, "lstm1");
  lstm2_.collect(out, "lstm2");
  classifier_.collect(out, "classifier");
}

PhocNet::PhocNet(const PhocNetConfig& cfg, Rng& rng) : cfg_(cfg) {
  if (cfg.phoc_dim == 0) throw ConfigError("phocnet: phoc_dim must be positive");
  if (cfg.spp_levels.empty()) throw ConfigError("phocnet: no SPP levels");
  const double w = cfg.width_factor;
  const std::size_t widths[] = {scaled_width(64, w), scaled_width(128, w),
                                scaled_width(256, w), scaled_width(512, w)};
  const std::size_t counts[] = {2, 2, 6, 3};
  std::size_t in = 1;
  for (std::size_t block = 0; block < 4; ++block) {
    for (std::size_t i = 0; i < counts[block]; ++i) {
      add_conv("conv" + std::to_string(block + 1) + "_" + std::to_string(i + 1), in,
               widths[block], 3, 1, rng);
      in = widths[block];
    }
    if (block < 2) add_pool({2, 2});
  }
  std::size_t cells = 0;
  for (auto l : cfg.spp_levels) cells += l * l;
  const std::size_t fc = cfg.fc_width ? cfg.fc_width : scaled_width(4096, w);
  fc1_ = Linear(in * cells, fc, rng);
  fc2_ = Linear(fc, fc, rng);
  fc3_ = Linear(fc, cfg.phoc_dim, rng);
  set_insertion_layer(cfg.insertion_layer);
}

void PhocNet::check_input(const Tensor& images) const {
  if (images.rank() != 4 || images.dim(1) != 1) {
    throw ContractError("phocnet: expected [B x 1 x H x W] input, got " +
                        shape_str(images.shape()));
  }
}

Tensor PhocNet::head(const Tensor& features) const {
  Tensor x = spp_pool(features, cfg_.spp_levels);
  x = relu(fc1_.forward(x));
  x = relu(fc2_.forward(x));
  return fc3_.forward(x);
}

void PhocNet::collect_head(ParamList& out) const {
  fc1_.collect(out, "fc1");
  fc2_.collect(out, "fc2");
  fc3_.collect(out, "fc3");
}

Tensor spp_pool(const Tensor& features, const std::vector<std::size_t>& levels) {
  if (features.rank() != 4) {
    throw DimensionError("spp_pool: expected [B x C x H x W], got " +
                         shape_str(features.shape()));
  }
  const std::size_t B = features.dim(0), C = features.dim(1);
  const std::size_t H = features.dim(2), W = features.dim(3);
  std::size_t cells = 0;
  for (auto l : levels) {
    if (l == 0 || l > H || l > W) {
      throw ContractError("spp_pool: level " + std::to_string(l) + " exceeds map " +
                          shape_str(features.shape()));
    }
    cells += l * l;
  }
  auto edge = [](std::size_t i, std::size_t n, std::size_t l) {
    return static_cast<std::size_t>(
        std::round(static_cast<double>(i * n) / static_cast<double>(l)));
  };
  const std::size_t per_sample = C * cells;
  auto argmax = std::make_shared<std::vector<std::size_t>>(B * per_sample);
  std::vector<double> out(B * per_sample);
  auto fv = features.data();
  for (std::size_t b = 0; b < B; ++b) {
    std::size_t k = b * per_sample;
    for (auto l : levels) {
      for (std::size_t c = 0; c < C; ++c) {
        const std::size_t base = (b * C + c) * H * W;
        for (std::size_t i = 0; i < l; ++i) {
          for (std::size_t j = 0; j < l; ++j, ++k) {
            std::size_t best = base + edge(i, H, l) * W + edge(j, W, l);
            for (std::size_t y = edge(i, H, l); y < edge(i + 1, H, l); ++y) {
              for (std::size_t x = edge(j, W, l); x < edge(j + 1, W, l); ++x) {
                if (fv[base + y * W + x] > fv[best]) best = base + y * W + x;
              }
            }
            (*argmax)[k] = best;
            out[k] = fv[best];
          }
        }
      }
    }
  }
  return make_result({B, per_sample}, std::move(out), {features},
                     [features, argmax](const Tensor& o) {
                       auto g = o.grad_view();
                       auto gf = features.mutable_grad();
                       for (std::size_t k = 0; k < g.size(); ++k) gf[(*argmax)[k]] += g[k];
                     });
}

}  // namespace afdm
