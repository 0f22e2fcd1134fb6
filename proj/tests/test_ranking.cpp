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

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "sarm/ranking.hpp"
#include "sarm/rng.hpp"
#include "sarm/sarm_model.hpp"

namespace sarm {
namespace {

ModelConfig micro_config(double lambda = 0.1) {
  ModelConfig cfg;
  cfg.d = 8;
  cfg.seq_len = 6;
  cfg.blocks = 2;
  cfg.fusion.sites = {0, 1};
  cfg.history_len = 3;
  cfg.rank_dim = 3;
  cfg.base_vocab = 10;
  cfg.ext_vocab = 12;
  cfg.authors = 2;
  cfg.lambda = lambda;
  return cfg;
}

RowVec<double> random_vec(Rng& rng, Eigen::Index n) {
  RowVec<double> v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.normal();
  return v;
}

double gelu_ref(double x) { return 0.5 * x * (1 + std::erf(x / std::sqrt(2.0))); }

// Plain-loop dense layer: act(x W + b).
std::vector<double> dense(const std::vector<double>& x, const Mat<double>& w, const Mat<double>& b, bool act) {
  std::vector<double> y(static_cast<std::size_t>(w.cols()));
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    double s = b(0, j);
    for (Eigen::Index i = 0; i < w.rows(); ++i) s += x[static_cast<std::size_t>(i)] * w(i, j);
    y[static_cast<std::size_t>(j)] = act ? gelu_ref(s) : s;
  }
  return y;
}

TEST(Losses, RecLossAtHalfIsFourLnTwo) {
  const TaskScores half = {0.5, 0.5, 0.5, 0.5};
  EXPECT_NEAR(rec_loss(half, {1, 0, 1, 0}), 4 * std::numbers::ln2, 1e-15);
  EXPECT_NEAR(rec_loss(half, {0, 0, 0, 0}), 2.772588722239781, 1e-12);
}

TEST(Losses, PerfectPredictionBoundedByClamp) {
  const TaskScores p = {1.0, 1.0, 1.0, 1.0};
  EXPECT_NEAR(rec_loss(p, {1, 1, 1, 1}), 4e-7, 1e-12);
  EXPECT_NEAR(rec_loss(p, {0, 0, 0, 0}), -4 * std::log(1e-7), 1e-6);
}

TEST(Losses, SingleTaskAndAux) {
  EXPECT_NEAR(bce(0.5, 1), std::numbers::ln2, 1e-15);
  EXPECT_NEAR(aux_loss(0.5, 1), std::numbers::ln2, 1e-15);
  EXPECT_LT(aux_loss(1e-12, 0), 1e-6);
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const double p = rng.uniform();
    const int y = rng.bernoulli(0.5);
    EXPECT_NEAR(aux_loss(p, y), rec_loss({p, 0.5, 0.5, 0.5}, {y, 0, 0, 0}) - 3 * std::numbers::ln2, 1e-12);
  }
}

TEST(Losses, TotalLoss) {
  EXPECT_EQ(total_loss(1.7, 0.3, 0.0), 1.7);
  EXPECT_EQ(total_loss(2.0, 0.5, 1.0), 2.5);
}

TEST(RankForward, ZeroWeightsGiveHalf) {
  auto p = init_model<double>(micro_config(), 1);
  p.trunk_w1.setZero();
  p.trunk_w2.setZero();
  for (auto& t : p.towers) t.w1.setZero(), t.w2.setZero();
  Rng rng(2);
  const auto s = rank_forward(random_vec(rng, 8), random_vec(rng, 8), random_vec(rng, 8), random_vec(rng, 3), p);
  for (double v : s) EXPECT_EQ(v, 0.5);
}

TEST(RankForward, ScoresAreClamped) {
  auto p = init_model<double>(micro_config(), 1);
  for (auto& t : p.towers) t.b2(0, 0) = 100;
  Rng rng(3);
  const auto s = rank_forward(random_vec(rng, 8), random_vec(rng, 8), random_vec(rng, 8), random_vec(rng, 3), p);
  for (double v : s) EXPECT_EQ(v, 1 - 1e-7);
}

TEST(RankForward, ShapeMismatchThrows) {
  const auto p = init_model<double>(micro_config(), 1);
  Rng rng(4);
  EXPECT_THROW(rank_forward(random_vec(rng, 8), random_vec(rng, 8), random_vec(rng, 8), random_vec(rng, 2), p),
               ShapeError);
}

TEST(RankForward, MatchesStraightLineReference) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto p = init_model<double>(micro_config(), static_cast<uint64_t>(trial));
    for (auto* b : {&p.trunk_b1, &p.trunk_b2}) *b = random_vec(rng, b->cols()) * 0.1;
    const auto c = random_vec(rng, 8), t = random_vec(rng, 8), u = random_vec(rng, 8), r = random_vec(rng, 3);
    std::vector<double> z;
    for (const auto* v : {&c, &t, &u, &r})
      for (Eigen::Index i = 0; i < v->size(); ++i) z.push_back((*v)(i));
    const auto h = dense(dense(z, p.trunk_w1, p.trunk_b1, true), p.trunk_w2, p.trunk_b2, true);
    const auto s = rank_forward(c, t, u, r, p);
    for (std::size_t k = 0; k < kNumTasks; ++k) {
      const auto logit = dense(dense(h, p.towers[k].w1, p.towers[k].b1, true), p.towers[k].w2, p.towers[k].b2, false);
      EXPECT_NEAR(s[k], 1 / (1 + std::exp(-logit[0])), 1e-10);
    }
  }
}

TEST(RankForward, MonotoneInTaskLogit) {
  auto p = init_model<double>(micro_config(), 6);
  Rng rng(6);
  const auto c = random_vec(rng, 8), t = random_vec(rng, 8), u = random_vec(rng, 8), r = random_vec(rng, 3);
  double prev = 0;
  for (double b = -3; b <= 3; b += 0.5) {
    p.towers[2].b2(0, 0) = b;
    const double s = rank_forward(c, t, u, r, p)[2];
    EXPECT_GT(s, prev);
    prev = s;
  }
}

TEST(AuxForward, EqualLogitsGiveHalf) {
  for (double z : {-50.0, 0.0, 3.0, 700.0}) EXPECT_EQ(aux_probability(z, z), 0.5);
}

TEST(AuxForward, SoftmaxEqualsSigmoidOfDifference) {
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const double z0 = 5 * rng.normal(), z1 = 5 * rng.normal(), shift = 100 * rng.normal();
    EXPECT_NEAR(aux_probability(z0, z1), sigmoid(z1 - z0), 1e-12);
    EXPECT_NEAR(aux_probability(z0 + shift, z1 + shift), aux_probability(z0, z1), 1e-12);
  }
}

TEST(AuxForward, ZeroOutputWeightsGiveHalf) {
  auto p = init_model<double>(micro_config(), 8);
  p.aux_w2.setZero();
  Rng rng(8);
  EXPECT_EQ(aux_forward(random_vec(rng, 8), random_vec(rng, 8), p), 0.5);
}

TEST(Heads, BackwardMatchesFiniteDifferences) {
  auto p = init_model<double>(micro_config(), 9);
  Rng rng(9);
  RowVec<double> c = random_vec(rng, 8), t = random_vec(rng, 8), u = random_vec(rng, 8), r = random_vec(rng, 3);
  const TaskLabels labels = {1, 0, 1, 0};
  auto loss = [&] {
    const auto s = rank_forward(c, t, u, r, p);
    double rec = 0;
    for (std::size_t k = 0; k < kNumTasks; ++k) rec += bce(s[k], labels[k]);
    return rec + 0.3 * bce(aux_forward(c, t, p), 1);
  };
  RankCache<double> rc;
  AuxCache<double> ac;
  rank_forward(c, t, u, r, p, &rc);
  aux_forward(c, t, p, &ac);
  auto g = p.zeros_like();
  const RowVec<double> dz = rank_backward(rc, labels, 1.0, p, g);
  const RowVec<double> dy = aux_backward(ac, 1, 0.3, p, g);
  std::vector<GradCoordinate> coords;
  std::vector<Mat<double>*> gs;
  g.visit([&](const std::string&, Mat<double>& m) { gs.push_back(&m); });
  std::size_t i = 0;
  p.visit([&](const std::string& name, Mat<double>& m) {
    Mat<double>* gm = gs[i++];
    if (name.starts_with("trunk") || name.starts_with("tower") || name.starts_with("aux"))
      for (Eigen::Index j = 0; j < m.size(); j += 2) coords.push_back({m.data() + j, gm->data()[j]});
  });
  for (Eigen::Index j = 0; j < 8; ++j) {
    coords.push_back({c.data() + j, dz(j) + dy(j)});
    coords.push_back({t.data() + j, dz(8 + j) + dy(8 + j)});
    coords.push_back({u.data() + j, dz(16 + j)});
  }
  EXPECT_LT(grad_check(loss, coords), 1e-4);
}

// A one-author, two-example batch through the full model.
struct MicroBatch {
  DualTokenization dual;
  std::vector<BatchAuthor> authors;
  std::vector<BatchExample<double>> examples;
};

MicroBatch micro_batch(Rng& rng) {
  MicroBatch b;
  b.dual.base_seq = {kClsId, 5, 6, 7, 0, 0};
  b.dual.align = {kClsId, 10, 10, 7, 0, 0};
  b.dual.ext_seq = {kClsId, 10, 7};
  b.authors = {{&b.dual, 1}};
  for (int e = 0; e < 2; ++e) {
    BatchExample<double> ex;
    ex.history = Mat<double>(3, 8);
    for (Eigen::Index i = 0; i < ex.history.size(); ++i) ex.history.data()[i] = rng.normal();
    ex.history_valid = {0, 1, 1};
    ex.rank_features = random_vec(rng, 3);
    ex.labels = {e, 0, e, 1};
    b.examples.push_back(ex);
  }
  return b;
}

TEST(TotalLoss, AuxGradientsScaleWithLambda) {
  Rng rng(10);
  const auto batch = micro_batch(rng);
  std::array<ModelParams<double>, 3> grads;
  const std::array<double, 3> lambdas = {0.0, 0.1, 1.0};
  const auto p = init_model<double>(micro_config(), 11);
  for (std::size_t k = 0; k < 3; ++k) {
    const auto cfg = micro_config(lambdas[k]);
    grads[k] = p.zeros_like();
    const auto r = forward_backward<double>(p, cfg, batch.authors, batch.examples, &grads[k]);
    EXPECT_NEAR(r.loss, r.rec + lambdas[k] * r.aux, 1e-15);
  }
  for (auto* m : {&grads[0].aux_w1, &grads[0].aux_b1, &grads[0].aux_w2, &grads[0].aux_b2})
    EXPECT_EQ(m->cwiseAbs().maxCoeff(), 0.0);
  EXPECT_LT((grads[1].aux_w1 - 0.1 * grads[2].aux_w1).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((grads[1].aux_w2 - 0.1 * grads[2].aux_w2).cwiseAbs().maxCoeff(), 1e-15);
  // Main-head gradients do not depend on lambda.
  EXPECT_EQ(grads[0].trunk_w1, grads[2].trunk_w1);
}

TEST(TotalLoss, FullBatchGradientsMatchFiniteDifferences) {
  for (double lambda : {0.0, 0.1}) {
    Rng rng(12);
    const auto batch = micro_batch(rng);
    const auto cfg = micro_config(lambda);
    auto p = init_model<double>(cfg, 13);
    auto g = p.zeros_like();
    forward_backward<double>(p, cfg, batch.authors, batch.examples, &g);
    std::vector<GradCoordinate> coords;
    std::vector<Mat<double>*> gs;
    g.visit([&](const std::string&, Mat<double>& m) { gs.push_back(&m); });
    std::size_t i = 0;
    p.visit([&](const std::string&, Mat<double>& m) {
      Mat<double>* gm = gs[i++];
      // Central differences on a loss of size ~3 carry ~1e-11 absolute noise, which
      // swamps the relative error of gradients below ~1e-7.
      for (Eigen::Index j = 0; j < m.size(); j += 7)
        if (std::abs(gm->data()[j]) > 1e-6) coords.push_back({m.data() + j, gm->data()[j]});
    });
    const auto loss = [&] { return forward_backward<double>(p, cfg, batch.authors, batch.examples, nullptr).loss; };
    EXPECT_GT(coords.size(), 100u);
    EXPECT_LT(grad_check(loss, coords), 1e-4) << "lambda " << lambda;
  }
}

}  // namespace
}  // namespace sarm
