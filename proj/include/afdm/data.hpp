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

#ifndef AFDM_DATA_HPP_
#define AFDM_DATA_HPP_

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "afdm/image.hpp"
#include "afdm/labels.hpp"
#include "afdm/tensor.hpp"

namespace afdm {

inline constexpr std::size_t kInputHeight = 64;

struct WordSample {
  Image image;
  Transcription transcription;
  std::string writer;  // may be empty
};

struct ManifestRow {
  std::string path;  // relative to the manifest root
  Transcription transcription;
  std::string writer;
};

/// UTF-8 TSV `path<TAB>transcription[<TAB>writer]`, no header. The root is the
/// directory holding the manifest file.
struct Manifest {
  std::filesystem::path root;
  std::vector<ManifestRow> rows;
};

Manifest read_manifest(const std::filesystem::path& file);
void write_manifest(const std::filesystem::path& file, const std::vector<ManifestRow>& rows);

/// Loads and validates every row. When `alphabet` is given, every
/// transcription must be spelled in it (LabelError otherwise).
std::vector<WordSample> load_dataset(const Manifest& manifest, const Alphabet* alphabet = nullptr,
                                     Polarity polarity = Polarity::kDarkOnLight);

/// Writes samples as PGM files `<prefix><index>.pgm` next to `file` and the
/// manifest that lists them.
void write_dataset(const std::filesystem::path& file, const std::vector<WordSample>& samples,
                   const std::string& prefix = "img_");

/// Width after resizing to `height` with the aspect ratio kept.
std::size_t scaled_input_width(const Image& image, std::size_t height = kInputHeight);

/// Bilinear resize to height 64 keeping the aspect ratio: [1 x 64 x W'].
Tensor preprocess(const Image& image);
Image preprocess_image(const Image& image);

/// Stacks [1 x 64 x W_i] images into [B x 1 x 64 x max(W_i, min_width)],
/// right-padded with background.
Tensor make_batch(std::span<const Tensor> images, std::size_t min_width = 0);
Tensor make_batch(std::span<const Image> images, std::size_t min_width = 0);

}  // namespace afdm

#endif  // AFDM_DATA_HPP_
