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

// Stand-in multi-task ranking backbone (shared MLP trunk + per-task towers),
// the author-side auxiliary head and the loss terms.

#include <array>
#include <cmath>

#include "sarm/model.hpp"
#include "sarm/numerics.hpp"

namespace sarm {

inline constexpr double kProbClamp = 1e-7;

/// Per-task probabilities, clamped into [1e-7, 1 - 1e-7].
using TaskScores = std::array<double, kNumTasks>;
using TaskLabels = std::array<int, kNumTasks>;

template <typename Scalar>
Scalar clamp_prob(Scalar p) {
  return std::clamp(p, Scalar(kProbClamp), Scalar(1.0 - kProbClamp));
}

/// d(BCE)/d(logit) through the clamp: zero where the clamp is active.
template <typename Scalar>
Scalar bce_logit_grad(Scalar p_raw, int label) {
  if (p_raw < Scalar(kProbClamp) || p_raw > Scalar(1.0 - kProbClamp)) return Scalar(0);
  return p_raw - Scalar(label);
}

template <typename Scalar>
Scalar bce(Scalar p, int label) {
  const Scalar c = clamp_prob(p);
  return label ? -std::log(c) : -std::log(Scalar(1) - c);
}

/// Sum of task-wise binary cross-entropies.
inline double rec_loss(const TaskScores& scores, const TaskLabels& labels) {
  double total = 0;
  for (std::size_t t = 0; t < kNumTasks; ++t) total += bce(scores[t], labels[t]);
  return total;
}

inline double aux_loss(double y_hat_aux, int click) { return bce(y_hat_aux, click); }

inline double total_loss(double rec, double aux, double lambda) { return rec + lambda * aux; }

template <typename Scalar>
struct RankCache {
  RowVec<Scalar> z, a1, t1, a2, t2;
  std::array<RowVec<Scalar>, kNumTasks> c, u;
  std::array<Scalar, kNumTasks> p_raw{};
};

/// concat -> GELU trunk (2 layers, width 4d) -> per-task GELU towers -> sigmoid.
template <typename Scalar>
std::array<Scalar, kNumTasks> rank_forward(const RowVec<Scalar>& h_cls, const RowVec<Scalar>& h_tar,
                                           const RowVec<Scalar>& h_uin, const RowVec<Scalar>& h_rank,
                                           const ModelParams<Scalar>& p, RankCache<Scalar>* cache = nullptr) {
  const auto d = h_cls.size();
  if (h_tar.size() != d || h_uin.size() != d || d + d + d + h_rank.size() != p.trunk_w1.rows())
    throw ShapeError("rank_forward: input dimensions do not match the trunk");
  RankCache<Scalar> local;
  RankCache<Scalar>& c = cache ? *cache : local;
  c.z.resize(p.trunk_w1.rows());
  c.z << h_cls, h_tar, h_uin, h_rank;
  const auto act = [](Scalar x) { return gelu(x); };
  c.a1 = c.z * p.trunk_w1 + p.trunk_b1;
  c.t1 = c.a1.unaryExpr(act);
  c.a2 = c.t1 * p.trunk_w2 + p.trunk_b2;
  c.t2 = c.a2.unaryExpr(act);
  std::array<Scalar, kNumTasks> scores{};
  for (std::size_t t = 0; t < kNumTasks; ++t) {
    const auto& tw = p.towers[t];
    c.c[t] = c.t2 * tw.w1 + tw.b1;
    c.u[t] = c.c[t].unaryExpr(act);
    const Scalar logit = c.u[t].dot(tw.w2.col(0)) + tw.b2(0, 0);
    c.p_raw[t] = sigmoid(logit);
    scores[t] = clamp_prob(c.p_raw[t]);
  }
  return scores;
}

/// Backward of sum_t BCE(task t) * scale; returns d(z) split by the caller.
template <typename Scalar>
RowVec<Scalar> rank_backward(const RankCache<Scalar>& c, const TaskLabels& labels, Scalar scale,
                             const ModelParams<Scalar>& p, ModelParams<Scalar>& g) {
  const auto grad = [](Scalar x) { return gelu_grad(x); };
  RowVec<Scalar> d_t2 = RowVec<Scalar>::Zero(c.t2.size());
  for (std::size_t t = 0; t < kNumTasks; ++t) {
    const auto& tw = p.towers[t];
    auto& gt = g.towers[t];
    const Scalar d_logit = scale * bce_logit_grad(c.p_raw[t], labels[t]);
    gt.b2(0, 0) += d_logit;
    gt.w2.col(0) += d_logit * c.u[t].transpose();
    const RowVec<Scalar> d_c = (d_logit * tw.w2.col(0).transpose()).cwiseProduct(c.c[t].unaryExpr(grad));
    gt.b1 += d_c;
    gt.w1.noalias() += c.t2.transpose() * d_c;
    d_t2.noalias() += d_c * tw.w1.transpose();
  }
  const RowVec<Scalar> d_a2 = d_t2.cwiseProduct(c.a2.unaryExpr(grad));
  g.trunk_b2 += d_a2;
  g.trunk_w2.noalias() += c.t1.transpose() * d_a2;
  const RowVec<Scalar> d_a1 = (d_a2 * p.trunk_w2.transpose()).cwiseProduct(c.a1.unaryExpr(grad));
  g.trunk_b1 += d_a1;
  g.trunk_w1.noalias() += c.z.transpose() * d_a1;
  return d_a1 * p.trunk_w1.transpose();
}

/// Positive-class softmax probability of (z0, z1); equals sigmoid(z1 - z0).
template <typename Scalar>
Scalar aux_probability(Scalar z0, Scalar z1) {
  const Scalar m = std::max(z0, z1);
  const Scalar e0 = std::exp(z0 - m), e1 = std::exp(z1 - m);
  return e1 / (e0 + e1);
}

template <typename Scalar>
struct AuxCache {
  RowVec<Scalar> y, c, u;
  RowVec<Scalar> logits;
  Scalar p_raw = 0;
};

/// Author-only head: concat(h_cls, h_tar) -> GELU layer -> 2-way softmax;
/// returns the positive-class probability.
template <typename Scalar>
Scalar aux_forward(const RowVec<Scalar>& h_cls, const RowVec<Scalar>& h_tar, const ModelParams<Scalar>& p,
                   AuxCache<Scalar>* cache = nullptr) {
  AuxCache<Scalar> local;
  AuxCache<Scalar>& c = cache ? *cache : local;
  c.y.resize(h_cls.size() + h_tar.size());
  c.y << h_cls, h_tar;
  c.c = c.y * p.aux_w1 + p.aux_b1;
  c.u = c.c.unaryExpr([](Scalar x) { return gelu(x); });
  c.logits = c.u * p.aux_w2 + p.aux_b2;
  c.p_raw = aux_probability(c.logits(0), c.logits(1));
  return clamp_prob(c.p_raw);
}

template <typename Scalar>
RowVec<Scalar> aux_backward(const AuxCache<Scalar>& c, int click, Scalar scale, const ModelParams<Scalar>& p,
                            ModelParams<Scalar>& g) {
  const Scalar d1 = scale * bce_logit_grad(c.p_raw, click);
  RowVec<Scalar> d_logits(2);
  d_logits << -d1, d1;
  g.aux_b2 += d_logits;
  g.aux_w2.noalias() += c.u.transpose() * d_logits;
  const RowVec<Scalar> d_c = (d_logits * p.aux_w2.transpose()).cwiseProduct(c.c.unaryExpr([](Scalar x) {
    return gelu_grad(x);
  }));
  g.aux_b1 += d_c;
  g.aux_w1.noalias() += c.y.transpose() * d_c;
  return d_c * p.aux_w1.transpose();
}

}  // namespace sarm
