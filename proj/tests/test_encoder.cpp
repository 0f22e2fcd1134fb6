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
#include <vector>

#include "sarm/encoder.hpp"
#include "sarm/rng.hpp"
#include "reference.hpp"

namespace sarm {
namespace {

using namespace reference;

ModelConfig micro_config() {
  ModelConfig cfg;
  cfg.d = 8;
  cfg.seq_len = 6;
  cfg.blocks = 2;
  cfg.fusion.sites = {0, 1};
  cfg.base_vocab = 12;
  cfg.ext_vocab = 16;
  cfg.authors = 3;
  return cfg;
}

// Random dual tokenization: [CLS], content, then a pad tail.
DualTokenization random_dual(Rng& rng, const ModelConfig& cfg) {
  DualTokenization t;
  const std::size_t L = static_cast<std::size_t>(cfg.seq_len);
  const std::size_t content = 1 + rng.index(L);
  for (std::size_t i = 0; i < L; ++i) {
    if (i == 0) {
      t.base_seq.push_back(kClsId);
      t.align.push_back(kClsId);
    } else if (i < content) {
      t.base_seq.push_back(static_cast<TokenId>(kNumReserved + rng.index(cfg.base_vocab - kNumReserved)));
      t.align.push_back(static_cast<TokenId>(kNumReserved + rng.index(cfg.ext_vocab - kNumReserved)));
    } else {
      t.base_seq.push_back(kPadId);
      t.align.push_back(kPadId);
    }
  }
  return t;
}

Rows reference_encode(const DualTokenization& t, const ModelParams<double>& p, const FusionConfig& fusion) {
  const auto d = static_cast<std::size_t>(p.e_base.cols());
  Rows x;
  std::vector<bool> valid;
  for (TokenId id : t.base_seq) {
    x.emplace_back(d);
    for (std::size_t c = 0; c < d; ++c) x.back()[c] = p.e_base(id, static_cast<Eigen::Index>(c));
    valid.push_back(id != kPadId);
  }
  for (std::size_t b = 0; b < p.blocks.size(); ++b) {
    block(x, p.blocks[b], valid);
    if (!fusion.active_at(static_cast<int>(b))) continue;
    const auto& F = p.fusion[b];
    for (std::size_t i = 0; i < x.size(); ++i) {
      Rows e(1, std::vector<double>(d));
      for (std::size_t c = 0; c < d; ++c) e[0][c] = p.e_ext(t.align[i], static_cast<Eigen::Index>(c));
      const auto kk = matmul(e, F.wk)[0], vv = matmul(e, F.wv)[0];
      const auto hn = norm_row(x[i], F.norm_h), kn = norm_row(kk, F.norm_k);
      double s = 0;
      for (std::size_t c = 0; c < d; ++c) s += hn[c] * kn[c];
      const double alpha = 1 / (1 + std::exp(-s / std::sqrt(static_cast<double>(d))));
      for (std::size_t c = 0; c < d; ++c) x[i][c] += alpha * vv[c];
    }
  }
  return x;
}


// ---------------------------------------------------------------------------

TEST(Encode, MatchesStraightLineReference) {
  const auto cfg = micro_config();
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = init_model<double>(cfg, 100 + static_cast<uint64_t>(trial));
    const auto t = random_dual(rng, cfg);
    EXPECT_LT(max_diff(encode(t, p, cfg.fusion), reference_encode(t, p, cfg.fusion)), 1e-10);
    FusionConfig partial = cfg.fusion;
    partial.sites = {1};
    EXPECT_LT(max_diff(encode(t, p, partial), reference_encode(t, p, partial)), 1e-10);
  }
}

TEST(Encode, DisabledFusionIgnoresFusionWeights) {
  auto cfg = micro_config();
  auto p = init_model<double>(cfg, 1);
  Rng rng(4);
  const auto t = random_dual(rng, cfg);
  FusionConfig off = cfg.fusion;
  off.enabled = false;
  FusionConfig none;
  none.sites = {};
  const auto a = encode(t, p, off);
  for (auto& f : p.fusion) f.wv.setRandom();
  EXPECT_EQ(encode(t, p, off), a);
  EXPECT_EQ(encode(t, p, none), a);
}

TEST(Encode, ZeroValueProjectionEqualsDisabledFusion) {
  const auto cfg = micro_config();
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto p = init_model<float>(cfg, static_cast<uint64_t>(trial));
    for (auto& f : p.fusion) f.wv.setZero();
    const auto t = random_dual(rng, cfg);
    FusionConfig off = cfg.fusion;
    off.enabled = false;
    EXPECT_EQ(encode(t, p, cfg.fusion), encode(t, p, off));
  }
}

TEST(Encode, ShapeErrors) {
  const auto cfg = micro_config();
  const auto p = init_model<double>(cfg, 1);
  DualTokenization t{{kClsId, 5}, {kClsId}, {kClsId}};
  EXPECT_THROW(encode(t, p, cfg.fusion), ShapeError);
  t.align = {kClsId, 99};
  EXPECT_THROW(encode(t, p, cfg.fusion), ShapeError);
  EXPECT_THROW(encode(DualTokenization{}, p, cfg.fusion), ShapeError);
}

TEST(Encode, PadContentNeverReachesClsOrTar) {
  const auto cfg = micro_config();
  const auto p = init_model<double>(cfg, 9);
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    auto t = random_dual(rng, cfg);
    t.base_seq[5] = kPadId;
    t.align[5] = kPadId;
    const auto a = encode_dual_author(t, 1, p, cfg.fusion);
    // A pad slot may carry a different ext id; it still stays masked.
    t.align[5] = static_cast<TokenId>(kNumReserved + rng.index(cfg.ext_vocab - kNumReserved));
    const auto h = encode(t, p, cfg.fusion);
    const auto full = author_tar(1, h, pad_mask_of(t.base_seq), p);
    const auto b = encode_dual_author(t, 1, p, cfg.fusion);
    EXPECT_LT((a.h_cls - h.row(0)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((a.h_tar - full).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((a.h_cls - b.h_cls).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Encode, OnlyClsRowAttendsOnlyItself) {
  const auto cfg = micro_config();
  const auto p = init_model<double>(cfg, 2);
  const DualTokenization t{{kClsId, 0, 0, 0, 0, 0}, {kClsId}, {kClsId, 0, 0, 0, 0, 0}};
  EncoderCache<double> cache;
  encode(t, p, cfg.fusion, &cache);
  for (const auto& b : cache.blocks) {
    EXPECT_EQ(b.attn_w(0, 0), 1.0);
    EXPECT_EQ(b.attn_w.row(0).tail(5).cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(Encode, GateValuesInOpenUnitInterval) {
  const auto cfg = micro_config();
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    auto p = init_model<double>(cfg, static_cast<uint64_t>(trial));
    for (auto& f : p.fusion) f.wk *= 10.0;
    EncoderCache<double> cache;
    encode(random_dual(rng, cfg), p, cfg.fusion, &cache);
    for (const auto& f : cache.fusion)
      for (double a : f.alpha) {
        EXPECT_GT(a, 0.0);
        EXPECT_LT(a, 1.0);
      }
  }
}

TEST(GatedFuse, ZeroValueIsIdentity) {
  const auto p = init_model<double>(micro_config(), 1);
  auto f = p.fusion[0];
  f.wv.setZero();
  Rng rng(8);
  RowVec<double> h(8), e(8);
  for (int i = 0; i < 8; ++i) h(i) = rng.normal(), e(i) = rng.normal();
  EXPECT_EQ(gated_fuse(h, e, f), h);
}

TEST(GatedFuse, OrthogonalGateIsHalf) {
  FusionParams<double> f;
  f.wk = Mat<double>::Identity(4, 4);
  f.wv = Mat<double>::Identity(4, 4) * 2.0;
  f.norm_h = Mat<double>::Ones(1, 4);
  f.norm_k = Mat<double>::Ones(1, 4);
  RowVec<double> h(4), e(4);
  h << 1, 0, 0, 0;
  e << 0, 3, 0, 0;
  double alpha = 0;
  const auto out = gated_fuse(h, e, f, &alpha);
  EXPECT_EQ(alpha, 0.5);
  RowVec<double> want(4);
  want << 1, 3, 0, 0;
  EXPECT_LT((out - want).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(GatedFuse, MatchesDirectFormula) {
  Rng rng(9);
  FusionParams<double> f;
  f.wk = Mat<double>(4, 4);
  f.wv = Mat<double>(4, 4);
  f.norm_h = Mat<double>(1, 4);
  f.norm_k = Mat<double>(1, 4);
  for (auto* m : {&f.wk, &f.wv, &f.norm_h, &f.norm_k})
    for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = rng.normal();
  RowVec<double> h(4), e(4);
  for (int i = 0; i < 4; ++i) h(i) = rng.normal(), e(i) = rng.normal();
  double k[4] = {}, v[4] = {}, hs = 0, ks = 0;
  for (int j = 0; j < 4; ++j)
    for (int i = 0; i < 4; ++i) k[j] += e(i) * f.wk(i, j), v[j] += e(i) * f.wv(i, j);
  for (int j = 0; j < 4; ++j) hs += h(j) * h(j), ks += k[j] * k[j];
  const double hr = std::sqrt(hs / 4 + 1e-6), kr = std::sqrt(ks / 4 + 1e-6);
  double s = 0;
  for (int j = 0; j < 4; ++j) s += (h(j) / hr * f.norm_h(0, j)) * (k[j] / kr * f.norm_k(0, j));
  const double alpha = 1 / (1 + std::exp(-s / 2));
  const auto out = gated_fuse(h, e, f);
  for (int j = 0; j < 4; ++j) EXPECT_NEAR(out(j), h(j) + alpha * v[j], 1e-12);
}

TEST(ExtractCls, ReturnsFirstRow) {
  Mat<double> h = Mat<double>::Zero(3, 4);
  h(0, 0) = 1;
  EXPECT_EQ(extract_cls(h), h.row(0));
  EXPECT_EQ(extract_cls<double>(Mat<double>::Ones(1, 4)), RowVec<double>::Ones(4));
  EXPECT_THROW(extract_cls<double>(Mat<double>(0, 4)), ShapeError);
}

TEST(AuthorTar, SingleValidPosition) {
  const auto p = init_model<double>(micro_config(), 3);
  Rng rng(10);
  Mat<double> h(6, 8);
  for (Eigen::Index i = 0; i < h.size(); ++i) h.data()[i] = rng.normal();
  const KeyMask valid = {0, 0, 1, 0, 0, 0};
  const RowVec<double> want = h.row(2) * p.cross_wv + p.e_id.row(2) * p.cross_wq;
  EXPECT_LT((author_tar(2, h, valid, p) - want).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(AuthorTar, DistinctIdsDistinctVectors) {
  const auto cfg = micro_config();
  const auto p = init_model<double>(cfg, 4);
  Rng rng(11);
  const auto t = random_dual(rng, cfg);
  const auto a = encode_dual_author(t, 1, p, cfg.fusion);
  const auto b = encode_dual_author(t, 2, p, cfg.fusion);
  EXPECT_EQ(a.h_cls, b.h_cls);
  EXPECT_GT((a.h_tar - b.h_tar).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(AuthorTar, UnknownIdUsesSlotZero) {
  const auto cfg = micro_config();
  const auto p = init_model<double>(cfg, 5);
  const AuthorIndex index({10, 20, 30});
  EXPECT_EQ(index.slot(20), 2);
  EXPECT_EQ(index.slot(99), 0);
  Rng rng(12);
  const auto t = random_dual(rng, cfg);
  EXPECT_EQ(encode_dual_author(t, index.slot(99), p, cfg.fusion).h_tar,
            encode_dual_author(t, 0, p, cfg.fusion).h_tar);
}

TEST(EncodeAuthor, EqualsManualComposition) {
  auto cfg = micro_config();
  const std::vector<std::string> corpus(5, "[CLS] P UB G [SEP] x y");
  const auto vocab = BaseVocab::build(corpus, 12);
  std::vector<std::vector<TokenId>> toks;
  for (const auto& c : corpus) toks.push_back(tokenize_words(c, vocab));
  const auto merges = train_bpe_merges(toks, vocab, 3, 3);
  cfg.base_vocab = vocab.size();
  cfg.ext_vocab = merges.ext_size();
  const auto p = init_model<double>(cfg, 6);
  const AuthorIndex index({7, 8});
  const auto got = encode_author(corpus[0], 8, vocab, merges, index, p, cfg);
  const auto dual = tokenize_dual(corpus[0], vocab, merges, 6);
  const auto h = encode(dual, p, cfg.fusion);
  EXPECT_EQ(got.h_cls.size(), 8);
  EXPECT_EQ(got.h_tar.size(), 8);
  EXPECT_LT((got.h_cls - extract_cls(h)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((got.h_tar - author_tar(2, h, pad_mask_of(dual.base_seq), p)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(encode_author(corpus[0], 8, vocab, merges, index, p, cfg).h_tar, got.h_tar);
}

TEST(EncodeAuthor, GradientsMatchFiniteDifferences) {
  const auto cfg = micro_config();
  auto p = init_model<double>(cfg, 8);
  Rng rng(13);
  const auto t = random_dual(rng, cfg);
  RowVec<double> wc(8), wt(8);
  for (int i = 0; i < 8; ++i) wc(i) = rng.normal(), wt(i) = rng.normal();
  auto loss = [&] {
    const auto e = encode_dual_author(t, 2, p, cfg.fusion);
    return e.h_cls.dot(wc) + e.h_tar.dot(wt);
  };
  AuthorForward<double> f;
  encode_dual_author(t, 2, p, cfg.fusion, &f);
  auto g = p.zeros_like();
  encode_dual_author_backward(2, p, f, wc, wt, g);
  std::vector<GradCoordinate> coords;
  std::vector<Mat<double>*> gs;
  g.visit([&](const std::string&, Mat<double>& m) { gs.push_back(&m); });
  std::size_t i = 0;
  p.visit([&](const std::string& name, Mat<double>& m) {
    Mat<double>& gm = *gs[i++];
    if (name.starts_with("user") || name.starts_with("trunk") || name.starts_with("tower") || name.starts_with("aux"))
      return;
    for (Eigen::Index j = 0; j < m.size(); j += 3) coords.push_back({m.data() + j, gm.data()[j]});
  });
  EXPECT_GT(coords.size(), 200u);
  // Roundoff dominates on near-zero coordinates, hence the loose bound.
  EXPECT_LT(grad_check(loss, coords), 1e-4);
}

TEST(EncoderCounter, CountsForwards) {
  const auto cfg = micro_config();
  const auto p = init_model<double>(cfg, 1);
  Rng rng(14);
  const auto before = encoder_forward_count();
  encode(random_dual(rng, cfg), p, cfg.fusion);
  encode(random_dual(rng, cfg), p, cfg.fusion);
  EXPECT_EQ(encoder_forward_count(), before + 2);
}

}  // namespace
}  // namespace sarm
