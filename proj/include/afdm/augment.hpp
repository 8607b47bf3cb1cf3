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

#ifndef AFDM_AUGMENT_HPP_
#define AFDM_AUGMENT_HPP_

#include "afdm/afdm.hpp"
#include "afdm/image.hpp"
#include "afdm/nn.hpp"

namespace afdm {

/// Image-level augmentation. Each transform is applied independently with its
/// probability; the geometric ones are composed about the image centre.
struct AugmentConfig {
  double p_rotate = 0.5;
  double max_rotate_deg = 5.0;
  double p_translate = 0.5;
  double max_translate = 0.1;  // fraction of the image size per axis
  double p_scale = 0.5;
  double min_scale = 0.9;
  double max_scale = 1.1;
  double p_shear = 0.5;
  double max_shear = 0.2;
  double p_noise = 0.5;
  double noise_sigma = 0.02;
};

/// Same size as the input; ink outside the source maps to background and the
/// result is clamped to [0,1].
Image image_augment(const Image& image, Rng& rng, const AugmentConfig& cfg = {});

/// The AFDM applied to raw images [B x 1 x H x W]; the module must be built
/// for one channel and one sub-map.
Tensor image_space_deform(const Tensor& images, const Afdm& module);

}  // namespace afdm

#endif  // AFDM_AUGMENT_HPP_
