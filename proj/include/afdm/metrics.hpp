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

#ifndef AFDM_METRICS_HPP_
#define AFDM_METRICS_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include "afdm/labels.hpp"
#include "afdm/networks.hpp"

namespace afdm {

struct ErrorRates {
  double wer = 0.0;  // percent of words not recognized exactly
  double cer = 0.0;  // percent edit operations per reference character
};

ErrorRates wer_cer(const std::vector<Transcription>& predictions,
                   const std::vector<Transcription>& references);

/// Average precision in [0,1] of a ranked relevance list; 0 when nothing is
/// relevant.
double average_precision(const std::vector<bool>& ranked_relevance);

double cosine_distance(std::span<const double> a, std::span<const double> b);

enum class RetrievalMode { kQbE, kQbS };

/// Mean average precision in percent. Candidates are ranked by ascending
/// cosine distance, ties by candidate index; relevance is equality of the
/// case-folded labels. In QbE mode query i is candidate exclude[i] (or
/// candidate i when `exclude` is empty) and is left out of its own ranking.
/// Queries without a relevant candidate are skipped; if none remain the
/// result is 0.
double map_retrieval(const std::vector<std::vector<double>>& queries,
                     const std::vector<Transcription>& query_labels,
                     const std::vector<std::vector<double>>& candidates,
                     const std::vector<Transcription>& candidate_labels, RetrievalMode mode,
                     std::span<const std::size_t> exclude = {});

std::vector<double> qbs_query(const Transcription& word, const Alphabet& alphabet,
                              const PhocLayout& layout);

/// sigmoid(phocnet(images)) per sample, for [B x 1 x H x W] input.
std::vector<std::vector<double>> qbe_query(const Tensor& images, const PhocNet& net);

/// Mean over frames of the largest per-frame probability, for [T x C]
/// log-probabilities.
double frame_confidence(const Tensor& logprobs);
/// One score per batch item of [B x T x C] log-probabilities.
std::vector<double> frame_confidences(const Tensor& logprobs);

struct ConfidenceSplit {
  std::vector<std::size_t> easy;  // sample indices, most confident first
  std::vector<std::size_t> hard;
};

/// Sorts descending by score (stable in index) and puts the first
/// round(ratio * n) samples in the easy set. DataError when `scores` is empty.
ConfidenceSplit confidence_split(const std::vector<double>& scores, double ratio = 0.7);

}  // namespace afdm

#endif  // AFDM_METRICS_HPP_
