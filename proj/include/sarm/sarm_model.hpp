/* Copyright 2026 The SARM Authors. All Rights Reserved.

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

#pragma once

// One mini-batch of the full model: target authors encoded live, history
// rows taken from the memory bank as constants, ranking + auxiliary heads,
// and the batch-mean loss L_rec + lambda * L_aux.

#include <span>
#include <vector>

#include "sarm/encoder.hpp"
#include "sarm/ranking.hpp"
#include "sarm/user_interest.hpp"

namespace sarm {

/// A distinct target author of a batch. Each author is encoded once per
/// batch; its events share the forward pass and their gradients are summed.
struct BatchAuthor {
  const DualTokenization* dual = nullptr;
  int slot = 0;
};

template <typename Scalar>
struct BatchExample {
  std::size_t author = 0;  // index into the batch's author list
  Mat<Scalar> history;     // m x d, constant
  KeyMask history_valid;
  RowVec<Scalar> rank_features;
  TaskLabels labels{};
};

template <typename Scalar>
struct BatchResult {
  double loss = 0;  // mean over examples of rec + lambda * aux
  double rec = 0;   // mean L_rec
  double aux = 0;   // mean L_aux
  std::vector<AuthorEncoding<Scalar>> authors;
  std::vector<TaskScores> scores;
  std::vector<double> aux_scores;
};

/// Forward pass; when `grads` is non-null, accumulates d(loss)/d(params)
/// into it.
template <typename Scalar>
BatchResult<Scalar> forward_backward(const ModelParams<Scalar>& p, const ModelConfig& cfg,
                                     std::span<const BatchAuthor> authors,
                                     std::span<const BatchExample<Scalar>> examples,
                                     ModelParams<Scalar>* grads) {
  BatchResult<Scalar> r;
  if (examples.empty()) return r;
  std::vector<AuthorForward<Scalar>> fwd(authors.size());
  r.authors.reserve(authors.size());
  for (std::size_t a = 0; a < authors.size(); ++a)
    r.authors.push_back(encode_dual_author(*authors[a].dual, authors[a].slot, p, cfg.fusion, &fwd[a]));

  const auto d = static_cast<Eigen::Index>(cfg.d);
  std::vector<RowVec<Scalar>> d_cls(authors.size(), RowVec<Scalar>::Zero(d));
  std::vector<RowVec<Scalar>> d_tar(authors.size(), RowVec<Scalar>::Zero(d));
  const Scalar inv_n = Scalar(1) / Scalar(examples.size());
  const Scalar aux_scale = Scalar(cfg.lambda) * inv_n;
  double rec_sum = 0, aux_sum = 0;
  for (const auto& ex : examples) {
    const auto& enc = r.authors[ex.author];
    UserCache<Scalar> uc;
    const RowVec<Scalar> h_uin = user_interest(ex.history, ex.history_valid, p, &uc);
    RankCache<Scalar> rc;
    const auto scores = rank_forward(enc.h_cls, enc.h_tar, h_uin, ex.rank_features, p, &rc);
    AuxCache<Scalar> ac;
    const Scalar y_aux = aux_forward(enc.h_cls, enc.h_tar, p, &ac);
    const int click = ex.labels[static_cast<int>(Task::kCtr)];
    TaskScores ts{};
    for (std::size_t t = 0; t < kNumTasks; ++t) ts[t] = static_cast<double>(scores[t]);
    // Losses in the working precision so gradient checks see the same function.
    Scalar rec = 0;
    for (std::size_t t = 0; t < kNumTasks; ++t) rec += bce(scores[t], ex.labels[t]);
    const Scalar aux = bce(y_aux, click);
    rec_sum += static_cast<double>(rec);
    aux_sum += static_cast<double>(aux);
    r.scores.push_back(ts);
    r.aux_scores.push_back(static_cast<double>(y_aux));
    if (!grads) continue;

    const RowVec<Scalar> d_z = rank_backward(rc, ex.labels, inv_n, p, *grads);
    d_cls[ex.author] += d_z.segment(0, d);
    d_tar[ex.author] += d_z.segment(d, d);
    user_interest_backward(ex.history_valid, p, uc, RowVec<Scalar>(d_z.segment(2 * d, d)), *grads);
    const RowVec<Scalar> d_y = aux_backward(ac, click, aux_scale, p, *grads);
    d_cls[ex.author] += d_y.segment(0, d);
    d_tar[ex.author] += d_y.segment(d, d);
  }
  r.rec = rec_sum / static_cast<double>(examples.size());
  r.aux = aux_sum / static_cast<double>(examples.size());
  r.loss = r.rec + cfg.lambda * r.aux;
  if (grads) {
    for (std::size_t a = 0; a < authors.size(); ++a)
      encode_dual_author_backward(authors[a].slot, p, fwd[a], d_cls[a], d_tar[a], *grads);
  }
  return r;
}

/// Serving-path scores from cached author vectors; no anchor encoding.
template <typename Scalar>
TaskScores score_cached(const RowVec<Scalar>& h_cls, const RowVec<Scalar>& h_tar, const Mat<Scalar>& history,
                        const KeyMask& history_valid, const RowVec<Scalar>& rank_features,
                        const ModelParams<Scalar>& p) {
  const RowVec<Scalar> h_uin = user_interest(history, history_valid, p);
  const auto s = rank_forward(h_cls, h_tar, h_uin, rank_features, p);
  TaskScores out{};
  for (std::size_t t = 0; t < kNumTasks; ++t) out[t] = static_cast<double>(s[t]);
  return out;
}

}  // namespace sarm
