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

#ifndef AFDM_IMAGE_HPP_
#define AFDM_IMAGE_HPP_

#include <cstddef>
#include <filesystem>
#include <vector>

namespace afdm {

/// Grayscale raster, row-major, ink = 1 and background = 0.
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(std::size_t h, std::size_t w, double fill = 0.0)
      : height(h), width(w), pixels(h * w, fill) {}

  double& at(std::size_t r, std::size_t c) { return pixels[r * width + c]; }
  double at(std::size_t r, std::size_t c) const { return pixels[r * width + c]; }
  bool empty() const { return height == 0 || width == 0; }
};

/// How stored gray levels map to ink. Files written by this library are dark
/// ink on a light page.
enum class Polarity { kDarkOnLight, kLightOnDark, kAuto };

Image read_pgm(const std::filesystem::path& path, Polarity polarity = Polarity::kDarkOnLight);
void write_pgm(const std::filesystem::path& path, const Image& image);

Image read_png(const std::filesystem::path& path, Polarity polarity = Polarity::kDarkOnLight);
void write_png(const std::filesystem::path& path, const Image& image);

/// Dispatches on the extension (.pgm or .png); DataError otherwise.
Image read_image(const std::filesystem::path& path, Polarity polarity = Polarity::kDarkOnLight);
void write_image(const std::filesystem::path& path, const Image& image);

/// Bilinear resampling with pixel-centre alignment. A same-size resize
/// returns the input unchanged.
Image resize_bilinear(const Image& image, std::size_t height, std::size_t width);

/// Places images side by side (top aligned) with `gap` background columns.
Image hconcat(const std::vector<Image>& images, std::size_t gap = 0);
/// Stacks images vertically (left aligned).
Image vconcat(const std::vector<Image>& images, std::size_t gap = 0);

}  // namespace afdm

#endif  // AFDM_IMAGE_HPP_
