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

#include "afdm/losses.hpp"

#include <cmath>
#include <limits>
#include <memory>

#include "afdm/error.hpp"
#include "afdm/ops.hpp"

namespace afdm {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

// Returns the loss and adds d(loss)/d(logprobs) * scale into `grad`.
double ctc_single(const double* lp, std::size_t T, std::size_t C,
                  const std::vector<std::size_t>& target, double* grad, double scale) {
  const std::size_t L = target.size();
  const std::size_t S = 2 * L + 1;
  std::vector<std::size_t> ext(S, 0);
  for (std::size_t i = 0; i < L; ++i) ext[2 * i + 1] = target[i];
  auto skip_ok = [&](std::size_t s) { return ext[s] != 0 && s >= 2 && ext[s] != ext[s - 2]; };

  std::vector<double> alpha(T * S, kNegInf), beta(T * S, kNegInf);
  alpha[0] = lp[ext[0]];
  if (S > 1) alpha[1] = lp[ext[1]];
  for (std::size_t t = 1; t < T; ++t) {
    const double* prev = alpha.data() + (t - 1) * S;
    double* cur = alpha.data() + t * S;
    for (std::size_t s = 0; s < S; ++s) {
      double a = prev[s];
      if (s >= 1) a = log_add(a, prev[s - 1]);
      if (skip_ok(s)) a = log_add(a, prev[s - 2]);
      cur[s] = a == kNegInf ? kNegInf : a + lp[t * C + ext[s]];
    }
  }
  const double* last = alpha.data() + (T - 1) * S;
  const double log_p = S > 1 ? log_add(last[S - 1], last[S - 2]) : last[0];
  if (!std::isfinite(log_p)) {
    throw NumericError("ctc: target has zero probability under the given frames");
  }

  beta[(T - 1) * S + S - 1] = lp[(T - 1) * C + ext[S - 1]];
  if (S > 1) beta[(T - 1) * S + S - 2] = lp[(T - 1) * C + ext[S - 2]];
  for (std::size_t t = T - 1; t-- > 0;) {
    const double* next = beta.data() + (t + 1) * S;
    double* cur = beta.data() + t * S;
    for (std::size_t s = 0; s < S; ++s) {
      double b = next[s];
      if (s + 1 < S) b = log_add(b, next[s + 1]);
      if (s + 2 < S && skip_ok(s + 2)) b = log_add(b, next[s + 2]);
      cur[s] = b == kNegInf ? kNegInf : b + lp[t * C + ext[s]];
    }
  }

  if (grad != nullptr) {
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t s = 0; s < S; ++s) {
        const double ab = alpha[t * S + s] + beta[t * S + s];
        if (ab == kNegInf) continue;
        grad[t * C + ext[s]] -= scale * std::exp(ab - lp[t * C + ext[s]] - log_p);
      }
    }
  }
  return -log_p;
}

void check_frames(std::size_t T, std::size_t C, const std::vector<std::size_t>& target) {
  if (T == 0) throw ContractError("ctc: no frames");
  for (auto l : target) {
    if (l == 0 || l >= C) {
      throw LabelError("ctc: label " + std::to_string(l) + " outside [1, " +
                       std::to_string(C - 1) + "]");
    }
  }
  const std::size_t need = ctc_min_frames(target);
  if (T < need) {
    throw InfeasibleTargetError("ctc: target needs " + std::to_string(need) +
                                " frames, only " + std::to_string(T) + " available");
  }
}

}  // namespace

std::size_t ctc_min_frames(std::span<const std::size_t> target) {
  std::size_t n = target.size();
  for (std::size_t i = 1; i < target.size(); ++i) {
    if (target[i] == target[i - 1]) ++n;
  }
  return n;
}

Tensor ctc_loss_batch(const Tensor& logprobs,
                      const std::vector<std::vector<std::size_t>>& targets) {
  if (logprobs.rank() != 3) {
    throw DimensionError("ctc_loss_batch: expected [B x T x C], got " + shape_str(logprobs.shape()));
  }
  const std::size_t B = logprobs.dim(0), T = logprobs.dim(1), C = logprobs.dim(2);
  if (targets.size() != B) {
    throw ContractError("ctc_loss_batch: " + std::to_string(targets.size()) + " targets for batch " +
                        std::to_string(B));
  }
  for (const auto& t : targets) check_frames(T, C, t);
  auto grad = std::make_shared<std::vector<double>>(B * T * C, 0.0);
  const double scale = 1.0 / static_cast<double>(B);
  double total = 0.0;
  auto lp = logprobs.data();
  for (std::size_t b = 0; b < B; ++b) {
    total += ctc_single(lp.data() + b * T * C, T, C, targets[b], grad->data() + b * T * C, scale);
  }
  return make_result({}, {total * scale}, {logprobs}, [logprobs, grad](const Tensor& o) {
    const double g = o.grad_view()[0];
    auto dst = logprobs.mutable_grad();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g * (*grad)[i];
  });
}

Tensor ctc_loss(const Tensor& logprobs, const std::vector<std::size_t>& target) {
  if (logprobs.rank() != 2) {
    throw DimensionError("ctc_loss: expected [T x C], got " + shape_str(logprobs.shape()));
  }
  return ctc_loss_batch(reshape(logprobs, {1, logprobs.dim(0), logprobs.dim(1)}), {target});
}

std::vector<std::size_t> ctc_greedy_decode(const Tensor& logprobs) {
  if (logprobs.rank() != 2) {
    throw DimensionError("ctc_greedy_decode: expected [T x C], got " +
                         shape_str(logprobs.shape()));
  }
  const std::size_t T = logprobs.dim(0), C = logprobs.dim(1);
  auto v = logprobs.data();
  std::vector<std::size_t> out;
  std::size_t prev = 0;
  for (std::size_t t = 0; t < T; ++t) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < C; ++c) {
      if (v[t * C + c] > v[t * C + best]) best = c;
    }
    if (best != 0 && best != prev) out.push_back(best);
    prev = best;
  }
  return out;
}

std::vector<std::vector<std::size_t>> ctc_greedy_decode_batch(const Tensor& logprobs) {
  if (logprobs.rank() != 3) {
    throw DimensionError("ctc_greedy_decode_batch: expected [B x T x C], got " +
                         shape_str(logprobs.shape()));
  }
  const std::size_t B = logprobs.dim(0), T = logprobs.dim(1), C = logprobs.dim(2);
  std::vector<std::vector<std::size_t>> out;
  auto v = logprobs.data();
  for (std::size_t b = 0; b < B; ++b) {
    Tensor frame({T, C}, std::vector<double>(v.begin() + static_cast<long>(b * T * C),
                                             v.begin() + static_cast<long>((b + 1) * T * C)));
    out.push_back(ctc_greedy_decode(frame));
  }
  return out;
}

Transcription lexicon_nearest(const Transcription& hypothesis,
                              const std::vector<Transcription>& lexicon) {
  if (lexicon.empty()) throw ConfigError("lexicon decoding needs a nonempty lexicon");
  const Transcription* best = nullptr;
  std::size_t best_d = 0;
  for (const auto& entry : lexicon) {
    const std::size_t d = edit_distance(hypothesis, entry);
    if (best == nullptr || d < best_d || (d == best_d && entry < *best)) {
      best = &entry;
      best_d = d;
    }
  }
  return *best;
}

Transcription ctc_lexicon_decode(const Tensor& logprobs, const Alphabet& alphabet,
                                 const std::vector<Transcription>& lexicon) {
  if (lexicon.empty()) throw ConfigError("lexicon decoding needs a nonempty lexicon");
  return lexicon_nearest(alphabet.ctc_decode(ctc_greedy_decode(logprobs)), lexicon);
}

Tensor sigmoid_bce(const Tensor& logits, const Tensor& targets) {
  if (logits.numel() != targets.numel()) {
    throw ContractError("sigmoid_bce: logits " + shape_str(logits.shape()) + " vs targets " +
                        shape_str(targets.shape()));
  }
  const std::size_t n = logits.numel();
  if (n == 0) throw ContractError("sigmoid_bce: empty input");
  auto z = logits.data();
  auto t = targets.data();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total += std::max(z[i], 0.0) - z[i] * t[i] + std::log1p(std::exp(-std::abs(z[i])));
  }
  const double inv = 1.0 / static_cast<double>(n);
  return make_result({}, {total * inv}, {logits, targets}, [logits, targets, inv](const Tensor& o) {
    const double g = o.grad_view()[0] * inv;
    auto z = logits.data();
    auto t = targets.data();
    if (logits.requires_grad()) {
      auto dz = logits.mutable_grad();
      for (std::size_t i = 0; i < dz.size(); ++i) {
        const double s = z[i] >= 0 ? 1.0 / (1.0 + std::exp(-z[i]))
                                   : std::exp(z[i]) / (1.0 + std::exp(z[i]));
        dz[i] += g * (s - t[i]);
      }
    }
    if (targets.requires_grad()) {
      auto dt = targets.mutable_grad();
      for (std::size_t i = 0; i < dt.size(); ++i) dt[i] -= g * z[i];
    }
  });
}

}  // namespace afdm
