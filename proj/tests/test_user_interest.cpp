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

#include "reference.hpp"
#include "sarm/rng.hpp"
#include "sarm/user_interest.hpp"

namespace sarm {
namespace {

using namespace reference;

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.d = 8;
  cfg.seq_len = 6;
  cfg.blocks = 1;
  cfg.fusion.sites = {0};
  cfg.history_len = 4;
  cfg.base_vocab = 8;
  cfg.ext_vocab = 8;
  cfg.authors = 3;
  return cfg;
}

Mat<double> random_rows(Rng& rng, int n, int d) {
  Mat<double> m(n, d);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

MemoryBank bank_with(std::initializer_list<uint64_t> ids, int d) {
  MemoryBank bank(d);
  for (uint64_t id : ids) {
    const std::vector<float> cls(static_cast<std::size_t>(d), static_cast<float>(id));
    const std::vector<float> tar(static_cast<std::size_t>(d), -static_cast<float>(id));
    bank.put(id, cls, tar, 0);
  }
  return bank;
}

TEST(BuildHistory, EmptyIsAllMasked) {
  const auto bank = bank_with({1}, 3);
  const auto h = build_history(std::span<const uint64_t>{}, bank, 4);
  EXPECT_EQ(h.valid, (KeyMask{0, 0, 0, 0}));
  EXPECT_EQ(h.rows.cwiseAbs().maxCoeff(), 0.0f);
  EXPECT_TRUE(h.author_ids.empty());
}

TEST(BuildHistory, KeepsMostRecentLeftPadded) {
  const auto bank = bank_with({1, 2, 3}, 3);
  const std::vector<uint64_t> ids = {1, 2, 3};
  const auto h = build_history(ids, bank, 2);
  EXPECT_EQ(h.author_ids, (std::vector<uint64_t>{2, 3}));
  EXPECT_EQ(h.valid, (KeyMask{1, 1}));
  EXPECT_EQ(h.rows(0, 0), 2.0f);
  EXPECT_EQ(h.rows(1, 0), 3.0f);

  const auto padded = build_history(ids, bank, 5);
  EXPECT_EQ(padded.valid, (KeyMask{0, 0, 1, 1, 1}));
  EXPECT_EQ(padded.rows.row(1).cwiseAbs().maxCoeff(), 0.0f);
  EXPECT_EQ(padded.rows(4, 2), 3.0f);
}

TEST(BuildHistory, RowsAreClsVectors) {
  const auto bank = bank_with({5}, 2);
  const std::vector<uint64_t> ids = {5};
  EXPECT_EQ(build_history(ids, bank, 1).rows(0, 1), 5.0f);
}

TEST(BuildHistory, MissingAuthorsGiveValidZeroRows) {
  const auto bank = bank_with({1}, 3);
  const std::vector<uint64_t> ids = {1, 77};
  const auto h = build_history(ids, bank, 3);
  EXPECT_EQ(h.valid, (KeyMask{0, 1, 1}));
  EXPECT_EQ(h.rows.row(2).cwiseAbs().maxCoeff(), 0.0f);
}

TEST(BuildHistory, FiltersOnLongView) {
  const auto bank = bank_with({1, 2, 3}, 2);
  const std::vector<ViewedAuthor> events = {{1, true}, {2, false}, {3, true}};
  EXPECT_EQ(build_history(std::span<const ViewedAuthor>(events), bank, 4).author_ids,
            (std::vector<uint64_t>{1, 3}));
}

TEST(BuildHistory, NonPositiveLengthIsConfigError) {
  const auto bank = bank_with({}, 2);
  EXPECT_THROW(build_history(std::span<const uint64_t>{}, bank, 0), ConfigError);
}

TEST(UserInterest, AllMaskedGivesZero) {
  const auto p = init_model<double>(small_config(), 1);
  Rng rng(1);
  EXPECT_EQ(user_interest(random_rows(rng, 4, 8), KeyMask{0, 0, 0, 0}, p), RowVec<double>::Zero(8));
}

TEST(UserInterest, SingleValidRowIsItsTransform) {
  const auto p = init_model<double>(small_config(), 2);
  Rng rng(2);
  const auto rows = random_rows(rng, 4, 8);
  const auto out = user_interest(rows, KeyMask{0, 0, 1, 0}, p);
  // A lone row at position 2 attends only to itself.
  Rows padded = to_rows(rows);
  block(padded, p.user_blocks[0], {false, false, true, false});
  for (int c = 0; c < 8; ++c) EXPECT_NEAR(out(c), padded[2][static_cast<std::size_t>(c)], 1e-12);
}

TEST(UserInterest, IdenticalRowsPoolToTheirTransform) {
  const auto p = init_model<double>(small_config(), 3);
  Rng rng(3);
  const RowVec<double> r = random_rows(rng, 1, 8);
  Mat<double> rows(4, 8);
  for (int i = 0; i < 4; ++i) rows.row(i) = r;
  const auto out = user_interest(rows, KeyMask{1, 1, 1, 1}, p);
  Mat<double> x = rows;
  block_forward<double>(p.user_blocks[0], x, KeyMask{1, 1, 1, 1}, nullptr);
  for (int i = 0; i < 4; ++i) EXPECT_LT((x.row(i) - out).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(UserInterest, MatchesStraightLineReference) {
  auto cfg = small_config();
  cfg.user_blocks = 2;
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = init_model<double>(cfg, static_cast<uint64_t>(trial));
    const auto rows = random_rows(rng, 4, 8);
    KeyMask valid(4);
    std::vector<bool> vb(4);
    for (int i = 0; i < 4; ++i) vb[static_cast<std::size_t>(i)] = valid[static_cast<std::size_t>(i)] = rng.bernoulli(0.7);
    valid[3] = vb[3] = true;
    Rows x = to_rows(rows);
    for (const auto& b : p.user_blocks) block(x, b, vb);
    std::vector<double> mean(8, 0.0);
    int n = 0;
    for (std::size_t i = 0; i < 4; ++i)
      if (vb[i]) {
        ++n;
        for (std::size_t c = 0; c < 8; ++c) mean[c] += x[i][c];
      }
    const auto out = user_interest(rows, valid, p);
    for (std::size_t c = 0; c < 8; ++c) EXPECT_NEAR(out(static_cast<Eigen::Index>(c)), mean[c] / n, 1e-10);
  }
}

TEST(UserInterest, MaskedRowsNeverMatter) {
  const auto p = init_model<double>(small_config(), 5);
  Rng rng(5);
  auto rows = random_rows(rng, 4, 8);
  const KeyMask valid = {0, 1, 0, 1};
  const auto a = user_interest(rows, valid, p);
  rows.row(0) *= 100.0;
  rows.row(2).setRandom();
  EXPECT_EQ(user_interest(rows, valid, p), a);
}

TEST(UserInterest, GradientsReachOnlyUserBlocks) {
  const auto cfg = small_config();
  auto p = init_model<double>(cfg, 6);
  Rng rng(6);
  const auto rows = random_rows(rng, 4, 8);
  const KeyMask valid = {0, 1, 1, 1};
  const RowVec<double> probe = random_rows(rng, 1, 8);
  UserCache<double> cache;
  user_interest(rows, valid, p, &cache);
  auto g = p.zeros_like();
  user_interest_backward(valid, p, cache, probe, g);

  std::vector<GradCoordinate> coords;
  std::vector<std::pair<std::string, Mat<double>*>> gs;
  g.visit([&](const std::string& name, Mat<double>& m) { gs.emplace_back(name, &m); });
  std::size_t i = 0;
  p.visit([&](const std::string& name, Mat<double>& m) {
    Mat<double>* gm = gs[i++].second;
    if (!name.starts_with("user")) {
      EXPECT_EQ(gm->cwiseAbs().maxCoeff(), 0.0) << name;
      return;
    }
    for (Eigen::Index j = 0; j < m.size(); ++j) coords.push_back({m.data() + j, gm->data()[j]});
  });
  EXPECT_LT(grad_check([&] { return user_interest(rows, valid, p).dot(probe); }, coords), 1e-4);
}

}  // namespace
}  // namespace sarm
