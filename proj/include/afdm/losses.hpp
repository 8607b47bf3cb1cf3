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

#ifndef AFDM_LOSSES_HPP_
#define AFDM_LOSSES_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include "afdm/labels.hpp"
#include "afdm/tensor.hpp"

namespace afdm {

/// Minimum number of frames that can emit `target` (repeats need a blank).
std::size_t ctc_min_frames(std::span<const std::size_t> target);

/// Negative log-likelihood of `target` (CTC labels, blank = 0) under
/// per-frame log-probabilities [T x C]. Differentiable wrt `logprobs`.
Tensor ctc_loss(const Tensor& logprobs, const std::vector<std::size_t>& target);

/// Batched form over [B x T x C]; the result is the mean over the batch.
Tensor ctc_loss_batch(const Tensor& logprobs,
                      const std::vector<std::vector<std::size_t>>& targets);

/// Per-frame argmax (lowest index wins ties), collapse repeats, drop blanks.
std::vector<std::size_t> ctc_greedy_decode(const Tensor& logprobs);
std::vector<std::vector<std::size_t>> ctc_greedy_decode_batch(const Tensor& logprobs);

/// Lexicon entry closest in edit distance; ties go to the smaller entry.
Transcription lexicon_nearest(const Transcription& hypothesis,
                              const std::vector<Transcription>& lexicon);
Transcription ctc_lexicon_decode(const Tensor& logprobs, const Alphabet& alphabet,
                                 const std::vector<Transcription>& lexicon);

/// Mean binary cross-entropy of sigmoid(logits) against `targets`, computed
/// in logit space.
Tensor sigmoid_bce(const Tensor& logits, const Tensor& targets);

}  // namespace afdm

#endif  // AFDM_LOSSES_HPP_
