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

#include "afdm/image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "afdm/error.hpp"

namespace afdm {
namespace {

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

// Converts stored gray levels in [0,1] (1 = white) to ink values.
Image to_ink(std::size_t h, std::size_t w, std::vector<double> gray, Polarity polarity) {
  bool invert = polarity == Polarity::kDarkOnLight;
  if (polarity == Polarity::kAuto) {
    double border = 0.0;
    std::size_t count = 0;
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t c = 0; c < w; ++c) {
        if (r == 0 || c == 0 || r + 1 == h || c + 1 == w) {
          border += gray[r * w + c];
          ++count;
        }
      }
    }
    invert = border / static_cast<double>(count) > 0.5;
  }
  Image out;
  out.height = h;
  out.width = w;
  out.pixels = std::move(gray);
  if (invert) {
    for (double& v : out.pixels) v = 1.0 - v;
  }
  return out;
}

unsigned char to_byte(double ink) {
  const double v = 1.0 - std::clamp(ink, 0.0, 1.0);
  return static_cast<unsigned char>(std::lround(v * 255.0));
}

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string pgm_token(std::istream& in) {
  std::string token;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      if (!token.empty()) break;
      continue;
    }
    if (std::isspace(ch)) {
      if (!token.empty()) break;
      continue;
    }
    token.push_back(static_cast<char>(ch));
  }
  return token;
}

std::size_t pgm_number(std::istream& in, const std::filesystem::path& path) {
  const std::string token = pgm_token(in);
  if (token.empty() || !std::all_of(token.begin(), token.end(),
                                    [](unsigned char c) { return std::isdigit(c); })) {
    throw DataError("malformed PGM header in " + path.string());
  }
  return std::stoul(token);
}

}  // namespace

Image read_pgm(const std::filesystem::path& path, Polarity polarity) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  if (pgm_token(in) != "P5") throw DataError("not a binary PGM (P5): " + path.string());
  const std::size_t w = pgm_number(in, path);
  const std::size_t h = pgm_number(in, path);
  const std::size_t maxval = pgm_number(in, path);
  if (w == 0 || h == 0) throw DataError("zero-size image: " + path.string());
  if (maxval == 0 || maxval > 65535) throw DataError("bad PGM maxval in " + path.string());
  const std::size_t bytes_per = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> raw(w * h * bytes_per);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
    throw DataError("truncated PGM data in " + path.string());
  }
  std::vector<double> gray(w * h);
  for (std::size_t i = 0; i < gray.size(); ++i) {
    const std::size_t v = bytes_per == 1 ? raw[i] : (std::size_t{raw[2 * i]} << 8) | raw[2 * i + 1];
    if (v > maxval) throw DataError("PGM sample exceeds maxval in " + path.string());
    gray[i] = static_cast<double>(v) / static_cast<double>(maxval);
  }
  return to_ink(h, w, std::move(gray), polarity);
}

void write_pgm(const std::filesystem::path& path, const Image& image) {
  if (image.empty()) throw DataError("cannot write an empty image");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot create " + path.string());
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  std::vector<unsigned char> raw(image.pixels.size());
  std::transform(image.pixels.begin(), image.pixels.end(), raw.begin(), to_byte);
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

Image read_png(const std::filesystem::path& path, Polarity polarity) {
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.string().c_str())) {
    throw DataError("cannot read PNG " + path.string() + ": " + png.message);
  }
  png.format = PNG_FORMAT_GRAY;
  std::vector<unsigned char> raw(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, raw.data(), 0, nullptr)) {
    const std::string message = png.message;
    png_image_free(&png);
    throw DataError("cannot decode PNG " + path.string() + ": " + message);
  }
  const std::size_t w = png.width;
  const std::size_t h = png.height;
  if (w == 0 || h == 0) throw DataError("zero-size image: " + path.string());
  std::vector<double> gray(w * h);
  for (std::size_t i = 0; i < gray.size(); ++i) gray[i] = raw[i] / 255.0;
  return to_ink(h, w, std::move(gray), polarity);
}

void write_png(const std::filesystem::path& path, const Image& image) {
  if (image.empty()) throw DataError("cannot write an empty image");
  std::vector<unsigned char> raw(image.pixels.size());
  std::transform(image.pixels.begin(), image.pixels.end(), raw.begin(), to_byte);
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&png, path.string().c_str(), 0, raw.data(), 0, nullptr)) {
    throw DataError("cannot write PNG " + path.string() + ": " + png.message);
  }
}

Image read_image(const std::filesystem::path& path, Polarity polarity) {
  const std::string ext = lower_extension(path);
  if (ext == ".pgm") return read_pgm(path, polarity);
  if (ext == ".png") return read_png(path, polarity);
  throw DataError("unsupported image format: " + path.string());
}

void write_image(const std::filesystem::path& path, const Image& image) {
  const std::string ext = lower_extension(path);
  if (ext == ".pgm") return write_pgm(path, image);
  if (ext == ".png") return write_png(path, image);
  throw DataError("unsupported image format: " + path.string());
}

Image resize_bilinear(const Image& image, std::size_t height, std::size_t width) {
  if (image.empty() || height == 0 || width == 0) {
    throw DataError("resize_bilinear: zero-size image");
  }
  if (height == image.height && width == image.width) return image;
  Image out(height, width);
  const double sy = static_cast<double>(image.height) / static_cast<double>(height);
  const double sx = static_cast<double>(image.width) / static_cast<double>(width);
  auto source = [](std::size_t i, double scale, std::size_t n, std::size_t& i0,
                   std::size_t& i1, double& frac) {
    double s = (static_cast<double>(i) + 0.5) * scale - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(n - 1));
    i0 = static_cast<std::size_t>(std::floor(s));
    i1 = std::min(i0 + 1, n - 1);
    frac = s - static_cast<double>(i0);
  };
  for (std::size_t r = 0; r < height; ++r) {
    std::size_t r0, r1;
    double fy;
    source(r, sy, image.height, r0, r1, fy);
    for (std::size_t c = 0; c < width; ++c) {
      std::size_t c0, c1;
      double fx;
      source(c, sx, image.width, c0, c1, fx);
      const double top = image.at(r0, c0) * (1.0 - fx) + image.at(r0, c1) * fx;
      const double bottom = image.at(r1, c0) * (1.0 - fx) + image.at(r1, c1) * fx;
      out.at(r, c) = top * (1.0 - fy) + bottom * fy;
    }
  }
  return out;
}

Image hconcat(const std::vector<Image>& images, std::size_t gap) {
  std::size_t h = 0;
  std::size_t w = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    h = std::max(h, images[i].height);
    w += images[i].width + (i ? gap : 0);
  }
  Image out(h, w);
  std::size_t x = 0;
  for (const Image& im : images) {
    for (std::size_t r = 0; r < im.height; ++r) {
      for (std::size_t c = 0; c < im.width; ++c) out.at(r, x + c) = im.at(r, c);
    }
    x += im.width + gap;
  }
  return out;
}

Image vconcat(const std::vector<Image>& images, std::size_t gap) {
  std::size_t h = 0;
  std::size_t w = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    w = std::max(w, images[i].width);
    h += images[i].height + (i ? gap : 0);
  }
  Image out(h, w);
  std::size_t y = 0;
  for (const Image& im : images) {
    for (std::size_t r = 0; r < im.height; ++r) {
      for (std::size_t c = 0; c < im.width; ++c) out.at(y + r, c) = im.at(r, c);
    }
    y += im.height + gap;
  }
  return out;
}

}  // namespace afdm
