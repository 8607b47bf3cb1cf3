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

#ifndef AFDM_SYNTH_HPP_
#define AFDM_SYNTH_HPP_

#include <cstddef>
#include <cstdint>
#include <vector>

#include "afdm/data.hpp"
#include "afdm/labels.hpp"
#include "afdm/nn.hpp"

namespace afdm {

/// Random distortion ranges for the stroke renderer. Slant magnitudes are
/// drawn from [slant_min_deg, slant_max_deg] with a random sign; lengths are
/// in pixels.
struct JitterConfig {
  double slant_min_deg = 0.0;
  double slant_max_deg = 0.0;
  double thickness_min = 2.0;
  double thickness_max = 2.0;
  double wobble = 0.0;   // baseline wobble amplitude
  double elastic = 0.0;  // per-glyph smooth displacement amplitude
};

JitterConfig no_jitter();
/// Training-range distortions.
JitterConfig mild_jitter();
/// Held-out distortions, stronger than anything in the training range.
JitterConfig hard_jitter();

struct SynthConfig {
  std::vector<Transcription> words;  // empty: random words
  std::size_t min_length = 2;
  std::size_t max_length = 8;
  JitterConfig jitter = mild_jitter();
  std::uint64_t seed = 0;
};

/// Symbols with a stroke glyph ('a'..'z').
const Alphabet& glyph_alphabet();
bool has_glyph(char32_t c);

/// Height-64 rendering; width grows with the word. ConfigError for symbols
/// without a glyph.
WordSample render_word(const Transcription& word, const JitterConfig& jitter, Rng& rng);

Transcription random_word(Rng& rng, std::size_t min_length, std::size_t max_length);

/// `n` samples; word i is words[i % words.size()] or a fresh random word.
/// Sample i depends only on (seed, i).
std::vector<WordSample> synthesize(const SynthConfig& cfg, std::size_t n);

}  // namespace afdm

#endif  // AFDM_SYNTH_HPP_
