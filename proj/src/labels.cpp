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

#include "afdm/labels.hpp"

#include <set>

#include "afdm/error.hpp"

namespace afdm {

Transcription utf8_decode(std::string_view text) {
  Transcription out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto lead = static_cast<unsigned char>(text[i]);
    std::size_t extra = 0;
    char32_t cp = 0;
    if (lead < 0x80) {
      cp = lead;
    } else if ((lead & 0xE0) == 0xC0) {
      extra = 1;
      cp = lead & 0x1F;
    } else if ((lead & 0xF0) == 0xE0) {
      extra = 2;
      cp = lead & 0x0F;
    } else if ((lead & 0xF8) == 0xF0) {
      extra = 3;
      cp = lead & 0x07;
    } else {
      throw DataError("invalid UTF-8 lead byte at offset " + std::to_string(i));
    }
    if (i + extra >= text.size() && extra > 0) {
      throw DataError("truncated UTF-8 sequence at offset " + std::to_string(i));
    }
    for (std::size_t k = 1; k <= extra; ++k) {
      const auto cont = static_cast<unsigned char>(text[i + k]);
      if ((cont & 0xC0) != 0x80) {
        throw DataError("invalid UTF-8 continuation byte at offset " + std::to_string(i + k));
      }
      cp = (cp << 6) | (cont & 0x3F);
    }
    const char32_t min_cp[] = {0, 0x80, 0x800, 0x10000};
    if (cp < min_cp[extra] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
      throw DataError("invalid UTF-8 code point at offset " + std::to_string(i));
    }
    out.push_back(cp);
    i += extra + 1;
  }
  return out;
}

std::string utf8_encode(std::u32string_view text) {
  std::string out;
  for (char32_t cp : text) {
    if (cp < 0x80) {
      out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
      out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
      out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
      out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
  }
  return out;
}

Transcription fold_case(Transcription text) {
  for (auto& c : text) {
    if (c >= U'A' && c <= U'Z') c = c - U'A' + U'a';
  }
  return text;
}

Alphabet::Alphabet(Transcription symbols) : symbols_(std::move(symbols)) {
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    if (!index_.emplace(symbols_[i], i).second) {
      throw LabelError("alphabet symbol '" + utf8_encode(symbols_.substr(i, 1)) +
                       "' appears twice");
    }
  }
}

Alphabet Alphabet::latin_lowercase() { return Alphabet(U"abcdefghijklmnopqrstuvwxyz"); }

Alphabet Alphabet::from_words(const std::vector<Transcription>& words) {
  std::set<char32_t> seen;
  for (const auto& w : words) seen.insert(w.begin(), w.end());
  return Alphabet(Transcription(seen.begin(), seen.end()));
}

std::size_t Alphabet::index(char32_t c) const {
  auto it = index_.find(c);
  if (it == index_.end()) {
    throw LabelError("symbol '" + utf8_encode(std::u32string_view(&c, 1)) +
                     "' is not in the alphabet");
  }
  return it->second;
}

std::vector<std::size_t> Alphabet::ctc_encode(const Transcription& word) const {
  std::vector<std::size_t> out;
  out.reserve(word.size());
  for (char32_t c : word) out.push_back(index(c) + 1);
  return out;
}

Transcription Alphabet::ctc_decode(const std::vector<std::size_t>& labels) const {
  Transcription out;
  for (auto l : labels) {
    if (l == 0 || l > symbols_.size()) {
      throw LabelError("label " + std::to_string(l) + " outside the alphabet");
    }
    out.push_back(symbols_[l - 1]);
  }
  return out;
}

std::size_t phoc_length(const Alphabet& alphabet, const PhocLayout& layout) {
  std::size_t regions = 0;
  for (auto l : layout.levels) regions += l;
  return alphabet.size() * regions + layout.bigrams.size() * layout.bigram_level;
}

namespace {

// Unit [i/n, (i+span)/n] occupies region [r/l, (r+1)/l] when the overlap is at
// least half the unit's length. Integer arithmetic after scaling by n*l.
bool occupies(std::size_t i, std::size_t span, std::size_t n, std::size_t r, std::size_t l) {
  const long lo = static_cast<long>(std::max(i * l, r * n));
  const long hi = static_cast<long>(std::min((i + span) * l, (r + 1) * n));
  return 2 * (hi - lo) >= static_cast<long>(span * l);
}

}  // namespace

std::vector<double> phoc_encode(const Transcription& word, const Alphabet& alphabet,
                                const PhocLayout& layout) {
  if (word.empty()) throw LabelError("cannot encode an empty word");
  std::vector<std::size_t> idx;
  for (char32_t c : word) idx.push_back(alphabet.index(c));
  const std::size_t n = word.size(), A = alphabet.size();
  std::vector<double> out(phoc_length(alphabet, layout), 0.0);
  std::size_t offset = 0;
  for (auto l : layout.levels) {
    if (l == 0) throw ConfigError("PHOC level must be positive");
    for (std::size_t r = 0; r < l; ++r) {
      for (std::size_t i = 0; i < n; ++i) {
        if (occupies(i, 1, n, r, l)) out[offset + r * A + idx[i]] = 1.0;
      }
    }
    offset += l * A;
  }
  const std::size_t nb = layout.bigrams.size();
  for (std::size_t r = 0; r < (nb ? layout.bigram_level : 0); ++r) {
    for (std::size_t i = 0; i + 1 < n; ++i) {
      if (!occupies(i, 2, n, r, layout.bigram_level)) continue;
      for (std::size_t b = 0; b < nb; ++b) {
        if (layout.bigrams[b] == word.substr(i, 2)) out[offset + r * nb + b] = 1.0;
      }
    }
  }
  return out;
}

std::vector<double> phoc_encode(const Transcription& word, const Alphabet& alphabet,
                                const std::vector<std::size_t>& levels) {
  PhocLayout layout;
  layout.levels = levels;
  return phoc_encode(word, alphabet, layout);
}

}  // namespace afdm
