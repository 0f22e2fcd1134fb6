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

// Semantic anchor encoder: pre-norm single-head transformer blocks with RoPE,
// gated fusion of extended-token embeddings after selected blocks, [CLS]
// extraction and an identity-aware cross-attention readout. Forward passes
// record what the hand-written backward passes need.

#include <atomic>
#include <cstdint>
#include <vector>

#include "sarm/model.hpp"
#include "sarm/numerics.hpp"
#include "sarm/tokenizer.hpp"

namespace sarm {

/// Number of encoder forward passes run in this process.
uint64_t encoder_forward_count();
void count_encoder_forward();

template <typename Scalar>
struct BlockCache {
  Mat<Scalar> x_in, n1, q, k, v, attn_w, attn_out, x_mid, n2, pre_act, act;
  std::vector<Scalar> inv1, inv2;
};

template <typename Scalar>
struct FusionCache {
  Mat<Scalar> h_in, e, k, v, hn, kn;
  std::vector<Scalar> inv_h, inv_k;
  std::vector<Scalar> alpha;
};

/// Runs one transformer block on `x` in place.
template <typename Scalar>
void block_forward(const BlockParams<Scalar>& p, Mat<Scalar>& x, const KeyMask& valid, BlockCache<Scalar>* cache) {
  BlockCache<Scalar> local;
  BlockCache<Scalar>& c = cache ? *cache : local;
  c.x_in = x;
  c.n1 = rmsnorm_rows<Scalar>(x, p.norm1, c.inv1);
  c.q = c.n1 * p.wq;
  c.k = c.n1 * p.wk;
  c.v = c.n1 * p.wv;
  rope_rows<Scalar>(c.q);
  rope_rows<Scalar>(c.k);
  auto att = masked_attention<Scalar>(c.q, c.k, c.v, valid);
  c.attn_w = std::move(att.weights);
  c.attn_out = std::move(att.output);
  c.x_mid = c.x_in + c.attn_out * p.wo;
  c.n2 = rmsnorm_rows<Scalar>(c.x_mid, p.norm2, c.inv2);
  c.pre_act = c.n2 * p.w1;
  c.act = c.pre_act.unaryExpr([](Scalar z) { return gelu(z); });
  x = c.x_mid + c.act * p.w2;
}

/// Given d(block output), accumulates parameter gradients and returns
/// d(block input).
template <typename Scalar>
Mat<Scalar> block_backward(const BlockParams<Scalar>& p, const BlockCache<Scalar>& c, const Mat<Scalar>& d_out,
                           BlockParams<Scalar>& g) {
  const Mat<Scalar> d_act = d_out * p.w2.transpose();
  g.w2.noalias() += c.act.transpose() * d_out;
  const Mat<Scalar> d_pre = d_act.cwiseProduct(c.pre_act.unaryExpr([](Scalar z) { return gelu_grad(z); }));
  g.w1.noalias() += c.n2.transpose() * d_pre;
  const Mat<Scalar> d_n2 = d_pre * p.w1.transpose();
  RowVec<Scalar> dg2 = RowVec<Scalar>::Zero(p.norm2.cols());
  const Mat<Scalar> d_mid = d_out + rmsnorm_rows_backward<Scalar>(d_n2, c.x_mid, p.norm2, c.inv2, dg2);
  g.norm2 += dg2;

  g.wo.noalias() += c.attn_out.transpose() * d_mid;
  const Mat<Scalar> d_attn = d_mid * p.wo.transpose();
  auto ag = masked_attention_backward<Scalar>(d_attn, c.q, c.k, c.v, c.attn_w);
  rope_rows<Scalar>(ag.dq, kRopeBase, /*inverse=*/true);
  rope_rows<Scalar>(ag.dk, kRopeBase, /*inverse=*/true);
  g.wq.noalias() += c.n1.transpose() * ag.dq;
  g.wk.noalias() += c.n1.transpose() * ag.dk;
  g.wv.noalias() += c.n1.transpose() * ag.dv;
  const Mat<Scalar> d_n1 = ag.dq * p.wq.transpose() + ag.dk * p.wk.transpose() + ag.dv * p.wv.transpose();
  RowVec<Scalar> dg1 = RowVec<Scalar>::Zero(p.norm1.cols());
  Mat<Scalar> d_in = d_mid + rmsnorm_rows_backward<Scalar>(d_n1, c.x_in, p.norm1, c.inv1, dg1);
  g.norm1 += dg1;
  return d_in;
}

// ---------------------------------------------------------------------------
// Gated fusion

/// Single-position gate: k = W_K e, v = W_V e,
/// alpha = sigmoid(RMSNorm(h) . RMSNorm(k) / sqrt(d)), out = h + alpha v.
template <typename Scalar>
RowVec<Scalar> gated_fuse(const RowVec<Scalar>& h, const RowVec<Scalar>& e_ext, const FusionParams<Scalar>& p,
                          Scalar* alpha_out = nullptr) {
  const RowVec<Scalar> k = e_ext * p.wk;
  const RowVec<Scalar> v = e_ext * p.wv;
  const Scalar s = rmsnorm<Scalar>(h, p.norm_h).dot(rmsnorm<Scalar>(k, p.norm_k)) / std::sqrt(Scalar(h.size()));
  const Scalar alpha = sigmoid(s);
  if (alpha_out) *alpha_out = alpha;
  return h + alpha * v;
}

/// Fuses every position with the extended token covering it.
template <typename Scalar>
void fusion_forward(const FusionParams<Scalar>& p, const Mat<Scalar>& e_ext, const std::vector<TokenId>& align,
                    Mat<Scalar>& x, FusionCache<Scalar>* cache) {
  FusionCache<Scalar> local;
  FusionCache<Scalar>& c = cache ? *cache : local;
  const auto n = x.rows();
  const Scalar inv_sqrt_d = Scalar(1) / std::sqrt(Scalar(x.cols()));
  c.h_in = x;
  c.e.resize(n, x.cols());
  for (Eigen::Index i = 0; i < n; ++i) c.e.row(i) = e_ext.row(align[static_cast<std::size_t>(i)]);
  c.k = c.e * p.wk;
  c.v = c.e * p.wv;
  c.hn = rmsnorm_rows<Scalar>(c.h_in, p.norm_h, c.inv_h);
  c.kn = rmsnorm_rows<Scalar>(c.k, p.norm_k, c.inv_k);
  c.alpha.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar a = sigmoid(c.hn.row(i).dot(c.kn.row(i)) * inv_sqrt_d);
    c.alpha[static_cast<std::size_t>(i)] = a;
    x.row(i) += a * c.v.row(i);
  }
}

template <typename Scalar>
Mat<Scalar> fusion_backward(const FusionParams<Scalar>& p, const FusionCache<Scalar>& c,
                            const std::vector<TokenId>& align, const Mat<Scalar>& d_out, FusionParams<Scalar>& g,
                            Mat<Scalar>& d_e_ext) {
  const auto n = d_out.rows();
  const Scalar inv_sqrt_d = Scalar(1) / std::sqrt(Scalar(d_out.cols()));
  Mat<Scalar> d_v(n, d_out.cols());
  Mat<Scalar> d_hn(n, d_out.cols());
  Mat<Scalar> d_kn(n, d_out.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar a = c.alpha[static_cast<std::size_t>(i)];
    d_v.row(i) = a * d_out.row(i);
    const Scalar ds = d_out.row(i).dot(c.v.row(i)) * a * (Scalar(1) - a);
    d_hn.row(i) = (ds * inv_sqrt_d) * c.kn.row(i);
    d_kn.row(i) = (ds * inv_sqrt_d) * c.hn.row(i);
  }
  RowVec<Scalar> dgh = RowVec<Scalar>::Zero(d_out.cols());
  RowVec<Scalar> dgk = RowVec<Scalar>::Zero(d_out.cols());
  Mat<Scalar> d_in = d_out + rmsnorm_rows_backward<Scalar>(d_hn, c.h_in, p.norm_h, c.inv_h, dgh);
  const Mat<Scalar> d_k = rmsnorm_rows_backward<Scalar>(d_kn, c.k, p.norm_k, c.inv_k, dgk);
  g.norm_h += dgh;
  g.norm_k += dgk;
  g.wk.noalias() += c.e.transpose() * d_k;
  g.wv.noalias() += c.e.transpose() * d_v;
  const Mat<Scalar> d_e = d_k * p.wk.transpose() + d_v * p.wv.transpose();
  for (Eigen::Index i = 0; i < n; ++i) d_e_ext.row(align[static_cast<std::size_t>(i)]) += d_e.row(i);
  return d_in;
}

// ---------------------------------------------------------------------------
// Encoder

template <typename Scalar>
struct EncoderCache {
  std::vector<BlockCache<Scalar>> blocks;
  std::vector<FusionCache<Scalar>> fusion;  // indexed by block; empty where no fusion ran
  std::vector<bool> fused;
};

inline KeyMask pad_mask_of(const std::vector<TokenId>& base_seq) {
  KeyMask valid(base_seq.size());
  for (std::size_t i = 0; i < base_seq.size(); ++i) valid[i] = base_seq[i] != kPadId;
  return valid;
}

/// Hidden states (L x d) of the anchor encoder.
template <typename Scalar>
Mat<Scalar> encode(const DualTokenization& dual, const ModelParams<Scalar>& p, const FusionConfig& fusion,
                   EncoderCache<Scalar>* cache = nullptr) {
  const auto n = static_cast<Eigen::Index>(dual.base_seq.size());
  if (dual.align.size() != dual.base_seq.size()) throw ShapeError("encode: align length differs from base length");
  if (n == 0) throw ShapeError("encode: empty sequence");
  count_encoder_forward();
  const auto d = p.e_base.cols();
  Mat<Scalar> x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto id = dual.base_seq[static_cast<std::size_t>(i)];
    if (id < 0 || id >= p.e_base.rows()) throw ShapeError("encode: base id outside embedding table");
    x.row(i) = p.e_base.row(id);
  }
  for (auto a : dual.align)
    if (a < 0 || a >= p.e_ext.rows()) throw ShapeError("encode: extended id outside embedding table");
  const KeyMask valid = pad_mask_of(dual.base_seq);
  if (cache) {
    cache->blocks.assign(p.blocks.size(), {});
    cache->fusion.assign(p.blocks.size(), {});
    cache->fused.assign(p.blocks.size(), false);
  }
  for (std::size_t b = 0; b < p.blocks.size(); ++b) {
    block_forward(p.blocks[b], x, valid, cache ? &cache->blocks[b] : nullptr);
    if (fusion.active_at(static_cast<int>(b))) {
      fusion_forward(p.fusion[b], p.e_ext, dual.align, x, cache ? &cache->fusion[b] : nullptr);
      if (cache) cache->fused[b] = true;
    }
  }
  return x;
}

/// Accumulates gradients of all author-side parameters given d(hidden states).
template <typename Scalar>
void encode_backward(const DualTokenization& dual, const ModelParams<Scalar>& p, const EncoderCache<Scalar>& cache,
                     Mat<Scalar> d_h, ModelParams<Scalar>& g) {
  for (std::size_t b = p.blocks.size(); b-- > 0;) {
    if (cache.fused[b]) d_h = fusion_backward(p.fusion[b], cache.fusion[b], dual.align, d_h, g.fusion[b], g.e_ext);
    d_h = block_backward(p.blocks[b], cache.blocks[b], d_h, g.blocks[b]);
  }
  for (Eigen::Index i = 0; i < d_h.rows(); ++i) g.e_base.row(dual.base_seq[static_cast<std::size_t>(i)]) += d_h.row(i);
}

template <typename Scalar>
RowVec<Scalar> extract_cls(const Mat<Scalar>& h) {
  if (h.rows() == 0) throw ShapeError("extract_cls: empty hidden states");
  return h.row(0);
}

template <typename Scalar>
struct TarCache {
  RowVec<Scalar> e_id, q;
  Mat<Scalar> k, v, weights;
};

/// Identity-aware author vector: single-head cross-attention from the
/// projected ID embedding onto the (pad-masked) hidden states, plus the
/// projected query as a residual.
template <typename Scalar>
RowVec<Scalar> author_tar(int slot, const Mat<Scalar>& h, const KeyMask& valid, const ModelParams<Scalar>& p,
                          TarCache<Scalar>* cache = nullptr) {
  if (slot < 0 || slot >= p.e_id.rows()) slot = 0;
  TarCache<Scalar> local;
  TarCache<Scalar>& c = cache ? *cache : local;
  c.e_id = p.e_id.row(slot);
  c.q = c.e_id * p.cross_wq;
  c.k = h * p.cross_wk;
  c.v = h * p.cross_wv;
  const Mat<Scalar> q = c.q;
  auto att = masked_attention<Scalar>(q, c.k, c.v, valid);
  c.weights = std::move(att.weights);
  return att.output.row(0) + c.q;
}

template <typename Scalar>
void author_tar_backward(int slot, const Mat<Scalar>& h, const ModelParams<Scalar>& p, const TarCache<Scalar>& c,
                         const RowVec<Scalar>& d_out, Mat<Scalar>& d_h, ModelParams<Scalar>& g) {
  if (slot < 0 || slot >= p.e_id.rows()) slot = 0;
  const Mat<Scalar> q = c.q;
  const Mat<Scalar> d_o = d_out;
  auto ag = masked_attention_backward<Scalar>(d_o, q, c.k, c.v, c.weights);
  const RowVec<Scalar> d_q = d_out + ag.dq.row(0);
  d_h.noalias() += ag.dk * p.cross_wk.transpose() + ag.dv * p.cross_wv.transpose();
  g.cross_wk.noalias() += h.transpose() * ag.dk;
  g.cross_wv.noalias() += h.transpose() * ag.dv;
  g.cross_wq.noalias() += c.e_id.transpose() * d_q;
  g.e_id.row(slot) += d_q * p.cross_wq.transpose();
}

/// Memory-bank payload of one author.
template <typename Scalar>
struct AuthorEncoding {
  RowVec<Scalar> h_cls;
  RowVec<Scalar> h_tar;
};

/// Drops trailing [PAD] positions (keeping position 0). Pad rows never reach
/// valid rows, h_CLS or h_TAR, so author encodings skip them.
inline DualTokenization trim_trailing_pads(const DualTokenization& dual) {
  std::size_t n = dual.base_seq.size();
  while (n > 1 && dual.base_seq[n - 1] == kPadId) --n;
  DualTokenization t;
  t.base_seq.assign(dual.base_seq.begin(), dual.base_seq.begin() + static_cast<std::ptrdiff_t>(n));
  t.align.assign(dual.align.begin(), dual.align.begin() + static_cast<std::ptrdiff_t>(std::min(n, dual.align.size())));
  t.ext_seq = dual.ext_seq;
  return t;
}

/// Cached forward of one author, kept for the backward pass.
template <typename Scalar>
struct AuthorForward {
  DualTokenization dual;  // trimmed input
  Mat<Scalar> h;
  KeyMask valid;
  EncoderCache<Scalar> enc;
  TarCache<Scalar> tar;
  AuthorEncoding<Scalar> out;
};

template <typename Scalar>
AuthorEncoding<Scalar> encode_dual_author(const DualTokenization& dual, int slot, const ModelParams<Scalar>& p,
                                          const FusionConfig& fusion, AuthorForward<Scalar>* fwd = nullptr) {
  AuthorForward<Scalar> local;
  AuthorForward<Scalar>& f = fwd ? *fwd : local;
  f.dual = trim_trailing_pads(dual);
  f.h = encode(f.dual, p, fusion, fwd ? &f.enc : nullptr);
  f.valid = pad_mask_of(f.dual.base_seq);
  f.out.h_cls = extract_cls(f.h);
  f.out.h_tar = author_tar(slot, f.h, f.valid, p, fwd ? &f.tar : nullptr);
  return f.out;
}

template <typename Scalar>
void encode_dual_author_backward(int slot, const ModelParams<Scalar>& p,
                                 const AuthorForward<Scalar>& f, const RowVec<Scalar>& d_cls,
                                 const RowVec<Scalar>& d_tar, ModelParams<Scalar>& g) {
  Mat<Scalar> d_h = Mat<Scalar>::Zero(f.h.rows(), f.h.cols());
  author_tar_backward(slot, f.h, p, f.tar, d_tar, d_h, g);
  d_h.row(0) += d_cls;
  encode_backward(f.dual, p, f.enc, std::move(d_h), g);
}

/// tokenize_dual -> encode -> (extract_cls, author_tar).
template <typename Scalar>
AuthorEncoding<Scalar> encode_author(std::string_view anchor_text, uint64_t author_id, const BaseVocab& vocab,
                                     const MergeTable& merges, const AuthorIndex& authors,
                                     const ModelParams<Scalar>& p, const ModelConfig& cfg) {
  const auto dual = tokenize_dual(anchor_text, vocab, merges, static_cast<std::size_t>(cfg.seq_len));
  return encode_dual_author(dual, authors.slot(author_id), p, cfg.fusion);
}

}  // namespace sarm
