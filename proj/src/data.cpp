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

#include "afdm/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "afdm/error.hpp"

namespace afdm {
namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

bool has_separator(std::string_view s) {
  return s.find_first_of("\t\r\n") != std::string_view::npos;
}

}  // namespace

Manifest read_manifest(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("cannot open manifest " + file.string());
  Manifest manifest;
  manifest.root = file.parent_path();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    const std::string where = file.string() + ":" + std::to_string(line_no);
    if (fields.size() < 2 || fields.size() > 3) {
      throw DataError("expected 2 or 3 tab-separated fields at " + where);
    }
    if (fields[0].empty()) throw DataError("empty image path at " + where);
    ManifestRow row{fields[0], utf8_decode(fields[1]), fields.size() == 3 ? fields[2] : ""};
    if (row.transcription.empty()) throw DataError("empty transcription at " + where);
    manifest.rows.push_back(std::move(row));
  }
  return manifest;
}

void write_manifest(const std::filesystem::path& file, const std::vector<ManifestRow>& rows) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw DataError("cannot create manifest " + file.string());
  for (const ManifestRow& row : rows) {
    const std::string text = utf8_encode(row.transcription);
    if (row.path.empty() || row.transcription.empty() || has_separator(row.path) ||
        has_separator(text) || has_separator(row.writer)) {
      throw DataError("manifest row cannot be represented: '" + row.path + "'");
    }
    out << row.path << '\t' << text;
    if (!row.writer.empty()) out << '\t' << row.writer;
    out << '\n';
  }
  if (!out) throw DataError("write failed for " + file.string());
}

std::vector<WordSample> load_dataset(const Manifest& manifest, const Alphabet* alphabet,
                                     Polarity polarity) {
  std::vector<WordSample> samples;
  samples.reserve(manifest.rows.size());
  for (const ManifestRow& row : manifest.rows) {
    const auto path = manifest.root / row.path;
    if (!std::filesystem::exists(path)) throw DataError("missing image " + path.string());
    if (alphabet != nullptr) {
      for (char32_t c : row.transcription) {
        if (!alphabet->contains(c)) {
          throw LabelError("transcription '" + utf8_encode(row.transcription) +
                           "' uses a symbol outside the alphabet");
        }
      }
    }
    samples.push_back({read_image(path, polarity), row.transcription, row.writer});
  }
  return samples;
}

void write_dataset(const std::filesystem::path& file, const std::vector<WordSample>& samples,
                   const std::string& prefix) {
  const auto dir = file.parent_path();
  if (!dir.empty()) std::filesystem::create_directories(dir);
  std::vector<ManifestRow> rows;
  rows.reserve(samples.size());
  const std::size_t digits = std::to_string(samples.empty() ? 0 : samples.size() - 1).size();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::string index = std::to_string(i);
    index.insert(0, digits - index.size(), '0');
    const std::string name = prefix + index + ".pgm";
    write_pgm(dir / name, samples[i].image);
    rows.push_back({name, samples[i].transcription, samples[i].writer});
  }
  write_manifest(file, rows);
}

std::size_t scaled_input_width(const Image& image, std::size_t height) {
  if (image.empty()) throw DataError("preprocess: zero-dimension image");
  const double w = static_cast<double>(image.width) * static_cast<double>(height) /
                   static_cast<double>(image.height);
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(w)));
}

Image preprocess_image(const Image& image) {
  return resize_bilinear(image, kInputHeight, scaled_input_width(image));
}

Tensor preprocess(const Image& image) {
  Image resized = preprocess_image(image);
  return Tensor({1, kInputHeight, resized.width}, std::move(resized.pixels));
}

Tensor make_batch(std::span<const Tensor> images, std::size_t min_width) {
  if (images.empty()) throw DataError("make_batch: empty batch");
  std::size_t width = min_width;
  for (const Tensor& t : images) {
    if (t.rank() != 3 || t.dim(0) != 1 || t.dim(1) != kInputHeight) {
      throw DimensionError("make_batch: expected [1 x 64 x W], got " + shape_str(t.shape()));
    }
    width = std::max(width, t.dim(2));
  }
  const std::size_t plane = kInputHeight * width;
  std::vector<double> values(images.size() * plane, 0.0);
  for (std::size_t b = 0; b < images.size(); ++b) {
    const auto src = images[b].data();
    const std::size_t w = images[b].dim(2);
    for (std::size_t r = 0; r < kInputHeight; ++r) {
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(r * w), w,
                  values.begin() + static_cast<std::ptrdiff_t>(b * plane + r * width));
    }
  }
  return Tensor({images.size(), 1, kInputHeight, width}, std::move(values));
}

Tensor make_batch(std::span<const Image> images, std::size_t min_width) {
  std::vector<Tensor> tensors;
  tensors.reserve(images.size());
  for (const Image& im : images) {
    if (im.height != kInputHeight) {
      throw DimensionError("make_batch: image height " + std::to_string(im.height) +
                           " is not 64; preprocess first");
    }
    tensors.emplace_back(Shape{1, kInputHeight, im.width}, im.pixels);
  }
  return make_batch(std::span<const Tensor>(tensors), min_width);
}

}  // namespace afdm
