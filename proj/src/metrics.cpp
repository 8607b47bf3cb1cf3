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

#include "afdm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "afdm/error.hpp"

namespace afdm {

ErrorRates wer_cer(const std::vector<Transcription>& predictions,
                   const std::vector<Transcription>& references) {
  if (predictions.size() != references.size()) {
    throw ContractError("wer_cer: " + std::to_string(predictions.size()) + " predictions for " +
                        std::to_string(references.size()) + " references");
  }
  if (references.empty()) throw ContractError("wer_cer: no references");
  std::size_t wrong = 0;
  std::size_t edits = 0;
  std::size_t chars = 0;
  for (std::size_t i = 0; i < references.size(); ++i) {
    if (references[i].empty()) throw ContractError("wer_cer: empty reference");
    if (predictions[i] != references[i]) ++wrong;
    edits += edit_distance(predictions[i], references[i]);
    chars += references[i].size();
  }
  return {100.0 * static_cast<double>(wrong) / static_cast<double>(references.size()),
          100.0 * static_cast<double>(edits) / static_cast<double>(chars)};
}

double average_precision(const std::vector<bool>& ranked_relevance) {
  std::size_t hits = 0;
  double sum = 0.0;
  for (std::size_t k = 0; k < ranked_relevance.size(); ++k) {
    if (ranked_relevance[k]) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(k + 1);
    }
  }
  return hits == 0 ? 0.0 : sum / static_cast<double>(hits);
}

double cosine_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("cosine_distance: length mismatch");
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 1.0;
  return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

double map_retrieval(const std::vector<std::vector<double>>& queries,
                     const std::vector<Transcription>& query_labels,
                     const std::vector<std::vector<double>>& candidates,
                     const std::vector<Transcription>& candidate_labels, RetrievalMode mode,
                     std::span<const std::size_t> exclude) {
  if (candidates.empty()) throw ContractError("map_retrieval: empty candidate set");
  if (queries.size() != query_labels.size() || candidates.size() != candidate_labels.size()) {
    throw ContractError("map_retrieval: vectors and labels differ in count");
  }
  std::vector<std::size_t> self;
  if (mode == RetrievalMode::kQbE) {
    if (exclude.empty()) {
      if (queries.size() != candidates.size()) {
        throw ContractError("map_retrieval: QbE queries must map to candidates");
      }
      self.resize(queries.size());
      std::iota(self.begin(), self.end(), std::size_t{0});
    } else {
      if (exclude.size() != queries.size()) {
        throw ContractError("map_retrieval: one excluded candidate per query");
      }
      self.assign(exclude.begin(), exclude.end());
      for (std::size_t s : self) {
        if (s >= candidates.size()) throw ContractError("map_retrieval: exclusion out of range");
      }
    }
  }
  std::vector<Transcription> folded(candidate_labels.size());
  std::transform(candidate_labels.begin(), candidate_labels.end(), folded.begin(), fold_case);

  double total = 0.0;
  std::size_t kept = 0;
  std::vector<std::pair<double, std::size_t>> order;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    const Transcription label = fold_case(query_labels[q]);
    order.clear();
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      if (!self.empty() && self[q] == c) continue;
      order.emplace_back(cosine_distance(queries[q], candidates[c]), c);
    }
    std::sort(order.begin(), order.end());
    std::vector<bool> relevance(order.size());
    bool any = false;
    for (std::size_t k = 0; k < order.size(); ++k) {
      relevance[k] = folded[order[k].second] == label;
      any = any || relevance[k];
    }
    if (!any) continue;
    total += average_precision(relevance);
    ++kept;
  }
  return kept == 0 ? 0.0 : 100.0 * total / static_cast<double>(kept);
}

std::vector<double> qbs_query(const Transcription& word, const Alphabet& alphabet,
                              const PhocLayout& layout) {
  return phoc_encode(word, alphabet, layout);
}

std::vector<std::vector<double>> qbe_query(const Tensor& images, const PhocNet& net) {
  NoGradScope no_grad;
  const Tensor probs = sigmoid(net.forward(images));
  const std::size_t n = probs.dim(0);
  const std::size_t d = probs.dim(1);
  std::vector<std::vector<double>> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].assign(probs.data().begin() + static_cast<std::ptrdiff_t>(i * d),
                  probs.data().begin() + static_cast<std::ptrdiff_t>((i + 1) * d));
  }
  return out;
}

double frame_confidence(const Tensor& logprobs) {
  if (logprobs.rank() != 2 || logprobs.dim(0) == 0) {
    throw DimensionError("frame_confidence: expected [T x C], got " + shape_str(logprobs.shape()));
  }
  const std::size_t t_len = logprobs.dim(0);
  const std::size_t c_len = logprobs.dim(1);
  const auto v = logprobs.data();
  double sum = 0.0;
  for (std::size_t t = 0; t < t_len; ++t) {
    const auto row = v.subspan(t * c_len, c_len);
    sum += std::exp(*std::max_element(row.begin(), row.end()));
  }
  return sum / static_cast<double>(t_len);
}

std::vector<double> frame_confidences(const Tensor& logprobs) {
  if (logprobs.rank() != 3) {
    throw DimensionError("frame_confidences: expected [B x T x C], got " +
                         shape_str(logprobs.shape()));
  }
  const std::size_t per = logprobs.dim(1) * logprobs.dim(2);
  std::vector<double> out;
  for (std::size_t b = 0; b < logprobs.dim(0); ++b) {
    const auto v = logprobs.data().subspan(b * per, per);
    out.push_back(frame_confidence(Tensor({logprobs.dim(1), logprobs.dim(2)},
                                          std::vector<double>(v.begin(), v.end()))));
  }
  return out;
}

ConfidenceSplit confidence_split(const std::vector<double>& scores, double ratio) {
  if (scores.empty()) throw DataError("confidence_split: empty dataset");
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw ConfigError("confidence_split: ratio must be in [0,1]");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  const auto n_easy = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(scores.size())));
  ConfidenceSplit split;
  split.easy.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_easy));
  split.hard.assign(order.begin() + static_cast<std::ptrdiff_t>(n_easy), order.end());
  return split;
}

}  // namespace afdm
