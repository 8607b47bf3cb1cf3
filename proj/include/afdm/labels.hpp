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

#ifndef AFDM_LABELS_HPP_
#define AFDM_LABELS_HPP_

#include <algorithm>
#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace afdm {

using Transcription = std::u32string;

/// Throws DataError on malformed UTF-8.
Transcription utf8_decode(std::string_view text);
std::string utf8_encode(std::u32string_view text);

/// ASCII case folding; other code points pass through.
Transcription fold_case(Transcription text);

/// Ordered set of user symbols. CTC index 0 is the blank; user symbol i
/// has CTC index i + 1.
class Alphabet {
 public:
  Alphabet() = default;
  explicit Alphabet(Transcription symbols);

  static Alphabet latin_lowercase();
  /// Sorted union of the symbols in `words`.
  static Alphabet from_words(const std::vector<Transcription>& words);

  std::size_t size() const { return symbols_.size(); }
  const Transcription& symbols() const { return symbols_; }
  bool contains(char32_t c) const { return index_.count(c) != 0; }
  std::size_t index(char32_t c) const;  // LabelError when absent
  char32_t symbol(std::size_t i) const { return symbols_.at(i); }

  std::vector<std::size_t> ctc_encode(const Transcription& word) const;
  Transcription ctc_decode(const std::vector<std::size_t>& labels) const;

 private:
  Transcription symbols_;
  std::unordered_map<char32_t, std::size_t> index_;
};

struct PhocLayout {
  std::vector<std::size_t> levels{1, 2, 4};
  std::vector<Transcription> bigrams;  // empty: no bigram section
  std::size_t bigram_level = 2;
};

std::size_t phoc_length(const Alphabet& alphabet, const PhocLayout& layout);

/// Binary pyramidal histogram of characters.
std::vector<double> phoc_encode(const Transcription& word, const Alphabet& alphabet,
                                const PhocLayout& layout);
std::vector<double> phoc_encode(const Transcription& word, const Alphabet& alphabet,
                                const std::vector<std::size_t>& levels);

template <typename Seq>
std::size_t edit_distance(const Seq& a, const Seq& b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

}  // namespace afdm

#endif  // AFDM_LABELS_HPP_
