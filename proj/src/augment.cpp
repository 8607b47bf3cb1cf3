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

#include "afdm/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "afdm/error.hpp"

namespace afdm {

Image image_augment(const Image& image, Rng& rng, const AugmentConfig& cfg) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto coin = [&](double p) { return unit(rng) < p; };
  auto range = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  // Forward map M = translate * rotate * shear * scale, centred.
  double a = 1.0, b = 0.0, c = 0.0, d = 1.0, tx = 0.0, ty = 0.0;
  auto compose = [&](double m00, double m01, double m10, double m11) {
    const double na = m00 * a + m01 * c;
    const double nb = m00 * b + m01 * d;
    const double nc = m10 * a + m11 * c;
    const double nd = m10 * b + m11 * d;
    a = na, b = nb, c = nc, d = nd;
  };
  bool geometric = false;
  if (coin(cfg.p_scale)) {
    const double s = range(cfg.min_scale, cfg.max_scale);
    compose(s, 0.0, 0.0, s);
    geometric = true;
  }
  if (coin(cfg.p_shear)) {
    compose(1.0, range(-cfg.max_shear, cfg.max_shear), 0.0, 1.0);
    geometric = true;
  }
  if (coin(cfg.p_rotate)) {
    const double t = range(-cfg.max_rotate_deg, cfg.max_rotate_deg) * std::numbers::pi / 180.0;
    compose(std::cos(t), -std::sin(t), std::sin(t), std::cos(t));
    geometric = true;
  }
  if (coin(cfg.p_translate)) {
    tx = range(-cfg.max_translate, cfg.max_translate) * static_cast<double>(image.width);
    ty = range(-cfg.max_translate, cfg.max_translate) * static_cast<double>(image.height);
    geometric = true;
  }

  Image out = image;
  if (geometric) {
    const double det = a * d - b * c;
    const double ia = d / det, ib = -b / det, ic = -c / det, id = a / det;
    const double cx = static_cast<double>(image.width) / 2.0;
    const double cy = static_cast<double>(image.height) / 2.0;
    auto pixel = [&](long r, long col) {
      if (r < 0 || col < 0 || r >= static_cast<long>(image.height) ||
          col >= static_cast<long>(image.width)) {
        return 0.0;
      }
      return image.at(static_cast<std::size_t>(r), static_cast<std::size_t>(col));
    };
    for (std::size_t r = 0; r < image.height; ++r) {
      for (std::size_t col = 0; col < image.width; ++col) {
        const double px = static_cast<double>(col) + 0.5 - cx - tx;
        const double py = static_cast<double>(r) + 0.5 - cy - ty;
        const double sx = ia * px + ib * py + cx - 0.5;
        const double sy = ic * px + id * py + cy - 0.5;
        const double fx = std::floor(sx);
        const double fy = std::floor(sy);
        const double wx = sx - fx;
        const double wy = sy - fy;
        const auto x0 = static_cast<long>(fx);
        const auto y0 = static_cast<long>(fy);
        out.at(r, col) = (1 - wy) * ((1 - wx) * pixel(y0, x0) + wx * pixel(y0, x0 + 1)) +
                         wy * ((1 - wx) * pixel(y0 + 1, x0) + wx * pixel(y0 + 1, x0 + 1));
      }
    }
  }
  if (coin(cfg.p_noise)) {
    std::normal_distribution<double> noise(0.0, cfg.noise_sigma);
    for (double& v : out.pixels) v += noise(rng);
  }
  for (double& v : out.pixels) v = std::clamp(v, 0.0, 1.0);
  return out;
}

Tensor image_space_deform(const Tensor& images, const Afdm& module) {
  if (module.config().channels != 1 || module.config().k != 1) {
    throw ConfigError("image_space_deform: module must have 1 channel and k = 1");
  }
  if (images.rank() != 4 || images.dim(1) != 1) {
    throw DimensionError("image_space_deform: expected [B x 1 x H x W], got " +
                         shape_str(images.shape()));
  }
  return module.deform(images);
}

}  // namespace afdm
