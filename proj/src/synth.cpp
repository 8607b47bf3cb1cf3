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

#include "afdm/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "afdm/error.hpp"

namespace afdm {
namespace {

// Glyph space: x to the right, y up from the baseline, x-height = 1.
struct Pt {
  double x;
  double y;
};
using Stroke = std::vector<Pt>;

struct Glyph {
  double width = 0.5;
  std::vector<Stroke> strokes;
};

constexpr double kUnit = 11.0;      // pixels per x-height
constexpr double kBaseline = 40.0;  // row of the baseline
constexpr double kGap = 0.25;       // inter-glyph spacing in glyph units
constexpr double kMargin = 6.0;

Stroke arc(double cx, double cy, double rx, double ry, double a0, double a1) {
  const int n = std::max(4, static_cast<int>(std::ceil(std::abs(a1 - a0) / 15.0)));
  Stroke s;
  for (int i = 0; i <= n; ++i) {
    const double a = (a0 + (a1 - a0) * i / n) * std::numbers::pi / 180.0;
    s.push_back({cx + rx * std::cos(a), cy + ry * std::sin(a)});
  }
  return s;
}

Stroke join(std::initializer_list<Stroke> parts) {
  Stroke s;
  for (const Stroke& p : parts) s.insert(s.end(), p.begin(), p.end());
  return s;
}

Stroke bowl() { return arc(0.25, 0.5, 0.25, 0.5, 0, 360); }

std::array<Glyph, 26> build_glyphs() {
  std::array<Glyph, 26> g;
  auto set = [&](char c, double width, std::vector<Stroke> strokes) {
    g[static_cast<std::size_t>(c - 'a')] = Glyph{width, std::move(strokes)};
  };
  const Stroke arch = join({{{0, 0.55}}, arc(0.25, 0.6, 0.25, 0.4, 180, 0), {{0.5, 0}}});
  set('a', 0.5, {bowl(), {{0.5, 1}, {0.5, 0}}});
  set('b', 0.5, {{{0, 1.75}, {0, 0}}, bowl()});
  set('c', 0.5, {arc(0.27, 0.5, 0.27, 0.5, 40, 320)});
  set('d', 0.5, {bowl(), {{0.5, 1.75}, {0.5, 0}}});
  set('e', 0.5, {join({{{0.02, 0.5}}, arc(0.26, 0.5, 0.25, 0.5, 0, 320)})});
  set('f', 0.5, {join({arc(0.45, 1.45, 0.25, 0.25, 60, 180), {{0.2, 0}}}), {{0, 1}, {0.45, 1}}});
  set('g', 0.5, {bowl(), join({{{0.5, 1}, {0.5, -0.45}}, arc(0.25, -0.45, 0.25, 0.25, 360, 200)})});
  set('h', 0.5, {{{0, 1.75}, {0, 0}}, arch});
  set('i', 0.15, {{{0.08, 1}, {0.08, 0}}, {{0.08, 1.35}, {0.08, 1.45}}});
  set('j', 0.35, {join({{{0.3, 1}, {0.3, -0.45}}, arc(0.1, -0.45, 0.2, 0.25, 360, 200)}),
                  {{0.3, 1.35}, {0.3, 1.45}}});
  set('k', 0.5, {{{0, 1.75}, {0, 0}}, {{0.45, 1}, {0, 0.4}}, {{0.15, 0.55}, {0.5, 0}}});
  set('l', 0.15, {{{0.08, 1.75}, {0.08, 0}}});
  set('m', 0.8, {{{0, 1}, {0, 0}},
                 join({{{0, 0.6}}, arc(0.2, 0.6, 0.2, 0.4, 180, 0), {{0.4, 0}}}),
                 join({{{0.4, 0.6}}, arc(0.6, 0.6, 0.2, 0.4, 180, 0), {{0.8, 0}}})});
  set('n', 0.5, {{{0, 1}, {0, 0}}, arch});
  set('o', 0.5, {bowl()});
  set('p', 0.5, {{{0, 1}, {0, -0.7}}, bowl()});
  set('q', 0.5, {bowl(), {{0.5, 1}, {0.5, -0.7}}});
  set('r', 0.4, {{{0, 1}, {0, 0}}, join({{{0, 0.55}}, arc(0.25, 0.55, 0.25, 0.4, 180, 60)})});
  set('s', 0.45, {{{0.45, 0.88}, {0.32, 0.99}, {0.12, 0.97}, {0.03, 0.8}, {0.1, 0.6},
                   {0.35, 0.45}, {0.45, 0.25}, {0.38, 0.06}, {0.2, 0}, {0.02, 0.1}}});
  set('t', 0.45, {join({{{0.18, 1.45}, {0.18, 0.15}}, arc(0.33, 0.15, 0.15, 0.15, 180, 300)}),
                  {{0, 1}, {0.42, 1}}});
  set('u', 0.5, {join({{{0, 1}, {0, 0.4}}, arc(0.25, 0.4, 0.25, 0.4, 180, 360)}),
                 {{0.5, 1}, {0.5, 0}}});
  set('v', 0.5, {{{0, 1}, {0.25, 0}, {0.5, 1}}});
  set('w', 0.8, {{{0, 1}, {0.2, 0}, {0.4, 0.85}, {0.6, 0}, {0.8, 1}}});
  set('x', 0.5, {{{0, 1}, {0.5, 0}}, {{0.5, 1}, {0, 0}}});
  set('y', 0.5, {{{0, 1}, {0.25, 0}}, {{0.5, 1}, {0.05, -0.7}}});
  set('z', 0.5, {{{0, 1}, {0.5, 1}, {0, 0}, {0.5, 0}}});
  return g;
}

const std::array<Glyph, 26>& glyphs() {
  static const std::array<Glyph, 26> table = build_glyphs();
  return table;
}

// Splits segments so that smooth displacement fields bend long strokes.
Stroke densify(const Stroke& s, double step) {
  Stroke out{s.front()};
  for (std::size_t i = 1; i < s.size(); ++i) {
    const Pt a = s[i - 1];
    const Pt b = s[i];
    const int n = std::max(1, static_cast<int>(std::ceil(std::hypot(b.x - a.x, b.y - a.y) / step)));
    for (int k = 1; k <= n; ++k) {
      const double t = static_cast<double>(k) / n;
      out.push_back({a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t});
    }
  }
  return out;
}

double uniform(Rng& rng, double lo, double hi) {
  if (hi <= lo) return lo;
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double segment_distance(Pt p, Pt a, Pt b) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy));
}

}  // namespace

JitterConfig no_jitter() { return JitterConfig{}; }

JitterConfig mild_jitter() {
  JitterConfig j;
  j.slant_min_deg = 0.0;
  j.slant_max_deg = 10.0;
  j.thickness_min = 1.0;
  j.thickness_max = 3.0;
  j.wobble = 1.0;
  j.elastic = 0.6;
  return j;
}

JitterConfig hard_jitter() {
  JitterConfig j;
  j.slant_min_deg = 12.0;
  j.slant_max_deg = 25.0;
  j.thickness_min = 1.0;
  j.thickness_max = 3.0;
  j.wobble = 2.5;
  j.elastic = 1.8;
  return j;
}

const Alphabet& glyph_alphabet() {
  static const Alphabet alphabet = Alphabet::latin_lowercase();
  return alphabet;
}

bool has_glyph(char32_t c) { return c >= U'a' && c <= U'z'; }

WordSample render_word(const Transcription& word, const JitterConfig& jitter, Rng& rng) {
  if (word.empty()) throw ConfigError("render_word: empty word");
  for (char32_t c : word) {
    if (!has_glyph(c)) {
      throw ConfigError("render_word: no glyph for '" + utf8_encode(Transcription(1, c)) + "'");
    }
  }
  const double sign = uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0;
  const double slant =
      sign * uniform(rng, jitter.slant_min_deg, jitter.slant_max_deg) * std::numbers::pi / 180.0;
  const double shear = std::tan(slant);
  const double thickness = uniform(rng, jitter.thickness_min, jitter.thickness_max);
  const double wobble_period = uniform(rng, 30.0, 60.0);
  const double wobble_phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);

  std::vector<std::vector<Pt>> strokes;  // pixel space, before the final shift
  double pen = 0.0;
  for (char32_t c : word) {
    const Glyph& glyph = glyphs()[static_cast<std::size_t>(c - U'a')];
    const double ax = uniform(rng, -1.0, 1.0) * jitter.elastic;
    const double ay = uniform(rng, -1.0, 1.0) * jitter.elastic;
    const double px = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const double py = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    for (const Stroke& s : glyph.strokes) {
      std::vector<Pt> out;
      for (const Pt& p : densify(s, 0.1)) {
        const double u = glyph.width > 0 ? p.x / glyph.width : 0.0;
        double x = pen + p.x * kUnit + ax * std::sin(1.5 * std::numbers::pi * p.y + px);
        const double height = p.y * kUnit + ay * std::sin(2.0 * std::numbers::pi * u + py);
        x += height * shear;
        const double y = kBaseline - height +
                         jitter.wobble * std::sin(2.0 * std::numbers::pi * x / wobble_period +
                                                  wobble_phase);
        out.push_back({x, y});
      }
      strokes.push_back(std::move(out));
    }
    pen += (glyph.width + kGap) * kUnit;
  }

  double min_x = strokes.front().front().x;
  double max_x = min_x;
  for (const auto& s : strokes) {
    for (const Pt& p : s) {
      min_x = std::min(min_x, p.x);
      max_x = std::max(max_x, p.x);
    }
  }
  const double shift = kMargin + thickness / 2.0 - min_x;
  const auto width =
      static_cast<std::size_t>(std::ceil(max_x - min_x + thickness + 2.0 * kMargin));
  WordSample sample;
  sample.image = Image(kInputHeight, width);
  sample.transcription = word;
  const double radius = thickness / 2.0;
  for (auto& s : strokes) {
    for (Pt& p : s) p.x += shift;
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
      const Pt a = s[i];
      const Pt b = s[i + 1];
      const double reach = radius + 1.0;
      const auto c0 = static_cast<long>(std::floor(std::min(a.x, b.x) - reach));
      const auto c1 = static_cast<long>(std::ceil(std::max(a.x, b.x) + reach));
      const auto r0 = static_cast<long>(std::floor(std::min(a.y, b.y) - reach));
      const auto r1 = static_cast<long>(std::ceil(std::max(a.y, b.y) + reach));
      for (long r = std::max(0L, r0); r <= std::min<long>(r1, kInputHeight - 1); ++r) {
        for (long c = std::max(0L, c0); c <= std::min<long>(c1, static_cast<long>(width) - 1); ++c) {
          const double d = segment_distance({c + 0.5, r + 0.5}, a, b);
          const double ink = std::clamp(radius + 0.5 - d, 0.0, 1.0);
          double& px = sample.image.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
          px = std::max(px, ink);
        }
      }
    }
  }
  return sample;
}

Transcription random_word(Rng& rng, std::size_t min_length, std::size_t max_length) {
  if (min_length == 0 || max_length < min_length) {
    throw ConfigError("random_word: need 1 <= min_length <= max_length");
  }
  std::uniform_int_distribution<std::size_t> length(min_length, max_length);
  std::uniform_int_distribution<int> letter(0, 25);
  Transcription word(length(rng), U'a');
  for (char32_t& c : word) c = static_cast<char32_t>(U'a' + letter(rng));
  return word;
}

std::vector<WordSample> synthesize(const SynthConfig& cfg, std::size_t n) {
  std::vector<WordSample> samples;
  samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = make_rng(cfg.seed, i, 0x5e17);
    const Transcription word = cfg.words.empty()
                                   ? random_word(rng, cfg.min_length, cfg.max_length)
                                   : cfg.words[i % cfg.words.size()];
    samples.push_back(render_word(word, cfg.jitter, rng));
  }
  return samples;
}

}  // namespace afdm
