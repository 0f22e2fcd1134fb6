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

// Model configuration and the full set of learnable tensors. Every tensor is
// stored as a row-major matrix (vectors are 1 x n) so optimizers, snapshots
// and gradient checks can walk the parameters uniformly through visit().

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sarm/errors.hpp"
#include "sarm/numerics.hpp"
#include "sarm/rng.hpp"

namespace sarm {

enum class Task : int { kCtr = 0, kWtr, kLvtr, kGtr };
inline constexpr std::size_t kNumTasks = 4;
inline constexpr std::array<const char*, kNumTasks> kTaskNames = {"ctr", "wtr", "lvtr", "gtr"};

/// Blocks after which gated fusion is applied.
struct FusionConfig {
  std::vector<int> sites = {0, 1, 2, 3};
  bool enabled = true;

  bool active_at(int block) const {
    return enabled && std::find(sites.begin(), sites.end(), block) != sites.end();
  }
};

struct ModelConfig {
  int d = 64;
  int seq_len = 64;
  int blocks = 4;
  int ffn_mult = 4;
  FusionConfig fusion;
  int history_len = 20;
  int user_blocks = 1;
  int rank_dim = 16;
  std::size_t base_vocab = 0;
  std::size_t ext_vocab = 0;
  std::size_t authors = 0;  // E_id has authors + 1 rows; row 0 = unknown
  double lambda = 0.1;

  void validate() const {
    if (d < 2 || d % 2 != 0) throw ConfigError("d must be even and >= 2");
    if (seq_len < 1) throw ConfigError("seq_len must be positive");
    if (blocks < 1) throw ConfigError("blocks must be positive");
    if (history_len < 1) throw ConfigError("history_len must be positive");
    if (rank_dim < 0) throw ConfigError("rank_dim must be non-negative");
    if (lambda < 0) throw ConfigError("lambda must be non-negative");
    for (int s : fusion.sites)
      if (s < 0 || s >= blocks) throw ConfigError("fusion site " + std::to_string(s) + " outside [0, blocks)");
    if (base_vocab < 4 || ext_vocab < base_vocab) throw ConfigError("vocabulary sizes inconsistent");
  }
};

/// Maps author ids to E_id rows; unknown ids map to row 0.
class AuthorIndex {
 public:
  AuthorIndex() = default;
  explicit AuthorIndex(std::vector<uint64_t> ids) : ids_(std::move(ids)) {
    std::sort(ids_.begin(), ids_.end());
    ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
  }
  std::size_t size() const { return ids_.size(); }
  int slot(uint64_t author_id) const {
    const auto it = std::lower_bound(ids_.begin(), ids_.end(), author_id);
    if (it == ids_.end() || *it != author_id) return 0;
    return static_cast<int>(it - ids_.begin()) + 1;
  }

 private:
  std::vector<uint64_t> ids_;
};

template <typename Scalar>
struct BlockParams {
  Mat<Scalar> norm1, wq, wk, wv, wo, norm2, w1, w2;

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".norm1", norm1);
    f(prefix + ".wq", wq);
    f(prefix + ".wk", wk);
    f(prefix + ".wv", wv);
    f(prefix + ".wo", wo);
    f(prefix + ".norm2", norm2);
    f(prefix + ".w1", w1);
    f(prefix + ".w2", w2);
  }
};

template <typename Scalar>
struct FusionParams {
  Mat<Scalar> wk, wv, norm_h, norm_k;

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".wk", wk);
    f(prefix + ".wv", wv);
    f(prefix + ".norm_h", norm_h);
    f(prefix + ".norm_k", norm_k);
  }
};

template <typename Scalar>
struct TowerParams {
  Mat<Scalar> w1, b1, w2, b2;
};

template <typename Scalar>
struct ModelParams {
  // Author side.
  Mat<Scalar> e_base, e_ext, e_id;
  std::vector<BlockParams<Scalar>> blocks;
  std::vector<FusionParams<Scalar>> fusion;  // one per block; used at fusion sites
  Mat<Scalar> cross_wq, cross_wk, cross_wv;
  // User side.
  std::vector<BlockParams<Scalar>> user_blocks;
  // Ranking trunk, task towers and auxiliary head.
  Mat<Scalar> trunk_w1, trunk_b1, trunk_w2, trunk_b2;
  std::array<TowerParams<Scalar>, kNumTasks> towers;
  Mat<Scalar> aux_w1, aux_b1, aux_w2, aux_b2;

  /// Calls f(name, tensor) on every tensor in a fixed order.
  template <typename F>
  void visit(F&& f) {
    f("e_base", e_base);
    f("e_ext", e_ext);
    for (std::size_t b = 0; b < blocks.size(); ++b) blocks[b].visit("block" + std::to_string(b), f);
    for (std::size_t b = 0; b < fusion.size(); ++b) fusion[b].visit("fusion" + std::to_string(b), f);
    f("e_id", e_id);
    f("cross.wq", cross_wq);
    f("cross.wk", cross_wk);
    f("cross.wv", cross_wv);
    for (std::size_t b = 0; b < user_blocks.size(); ++b) user_blocks[b].visit("user" + std::to_string(b), f);
    f("trunk.w1", trunk_w1);
    f("trunk.b1", trunk_b1);
    f("trunk.w2", trunk_w2);
    f("trunk.b2", trunk_b2);
    for (std::size_t t = 0; t < kNumTasks; ++t) {
      const std::string p = std::string("tower.") + kTaskNames[t];
      f(p + ".w1", towers[t].w1);
      f(p + ".b1", towers[t].b1);
      f(p + ".w2", towers[t].w2);
      f(p + ".b2", towers[t].b2);
    }
    f("aux.w1", aux_w1);
    f("aux.b1", aux_b1);
    f("aux.w2", aux_w2);
    f("aux.b2", aux_b2);
  }

  template <typename F>
  void visit(F&& f) const {
    const_cast<ModelParams*>(this)->visit([&](const std::string& name, Mat<Scalar>& m) {
      f(name, static_cast<const Mat<Scalar>&>(m));
    });
  }

  /// Zero tensors with the same shapes.
  ModelParams zeros_like() const {
    ModelParams z = *this;
    z.visit([](const std::string&, Mat<Scalar>& m) { m.setZero(); });
    return z;
  }

  template <typename To>
  ModelParams<To> cast() const {
    ModelParams<To> out;
    out.blocks.resize(blocks.size());
    out.fusion.resize(fusion.size());
    out.user_blocks.resize(user_blocks.size());
    std::vector<const Mat<Scalar>*> src;
    visit([&](const std::string&, const Mat<Scalar>& m) { src.push_back(&m); });
    std::size_t i = 0;
    out.visit([&](const std::string&, Mat<To>& m) { m = src[i++]->template cast<To>(); });
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    visit([&](const std::string&, const Mat<Scalar>& m) { n += static_cast<std::size_t>(m.size()); });
    return n;
  }
};

namespace detail {

template <typename Scalar>
BlockParams<Scalar> init_block(Rng& rng, int d, int hidden) {
  BlockParams<Scalar> b;
  b.norm1 = init_params<Scalar>(rng, 1, d, InitScheme::kOnes, d);
  b.wq = init_params<Scalar>(rng, d, d, InitScheme::kUniformScaled, d);
  b.wk = init_params<Scalar>(rng, d, d, InitScheme::kUniformScaled, d);
  b.wv = init_params<Scalar>(rng, d, d, InitScheme::kUniformScaled, d);
  b.wo = init_params<Scalar>(rng, d, d, InitScheme::kUniformScaled, d);
  b.norm2 = init_params<Scalar>(rng, 1, d, InitScheme::kOnes, d);
  b.w1 = init_params<Scalar>(rng, d, hidden, InitScheme::kUniformScaled, d);
  b.w2 = init_params<Scalar>(rng, hidden, d, InitScheme::kUniformScaled, hidden);
  return b;
}

}  // namespace detail

/// Fresh parameters: uniform-scaled tables and projections, unit norm
/// gains, zero biases. Deterministic in `seed`.
template <typename Scalar>
ModelParams<Scalar> init_model(const ModelConfig& cfg, uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  const int d = cfg.d;
  const int hidden = cfg.ffn_mult * d;
  const auto uni = InitScheme::kUniformScaled;
  ModelParams<Scalar> p;
  p.e_base = init_params<Scalar>(rng, static_cast<Eigen::Index>(cfg.base_vocab), d, uni, d);
  p.e_ext = init_params<Scalar>(rng, static_cast<Eigen::Index>(cfg.ext_vocab), d, uni, d);
  for (int b = 0; b < cfg.blocks; ++b) p.blocks.push_back(detail::init_block<Scalar>(rng, d, hidden));
  for (int b = 0; b < cfg.blocks; ++b) {
    FusionParams<Scalar> f;
    f.wk = init_params<Scalar>(rng, d, d, uni, d);
    f.wv = init_params<Scalar>(rng, d, d, uni, d);
    f.norm_h = init_params<Scalar>(rng, 1, d, InitScheme::kOnes, d);
    f.norm_k = init_params<Scalar>(rng, 1, d, InitScheme::kOnes, d);
    p.fusion.push_back(std::move(f));
  }
  p.e_id = init_params<Scalar>(rng, static_cast<Eigen::Index>(cfg.authors + 1), d, uni, d);
  p.cross_wq = init_params<Scalar>(rng, d, d, uni, d);
  p.cross_wk = init_params<Scalar>(rng, d, d, uni, d);
  p.cross_wv = init_params<Scalar>(rng, d, d, uni, d);
  for (int b = 0; b < cfg.user_blocks; ++b) p.user_blocks.push_back(detail::init_block<Scalar>(rng, d, hidden));

  const int in = 3 * d + cfg.rank_dim;
  const int trunk = 4 * d;
  p.trunk_w1 = init_params<Scalar>(rng, in, trunk, uni, in);
  p.trunk_b1 = init_params<Scalar>(rng, 1, trunk, InitScheme::kZeros, in);
  p.trunk_w2 = init_params<Scalar>(rng, trunk, trunk, uni, trunk);
  p.trunk_b2 = init_params<Scalar>(rng, 1, trunk, InitScheme::kZeros, trunk);
  for (auto& t : p.towers) {
    t.w1 = init_params<Scalar>(rng, trunk, d, uni, trunk);
    t.b1 = init_params<Scalar>(rng, 1, d, InitScheme::kZeros, trunk);
    t.w2 = init_params<Scalar>(rng, d, 1, uni, d);
    t.b2 = init_params<Scalar>(rng, 1, 1, InitScheme::kZeros, d);
  }
  p.aux_w1 = init_params<Scalar>(rng, 2 * d, d, uni, 2 * d);
  p.aux_b1 = init_params<Scalar>(rng, 1, d, InitScheme::kZeros, 2 * d);
  p.aux_w2 = init_params<Scalar>(rng, d, 2, uni, d);
  p.aux_b2 = init_params<Scalar>(rng, 1, 2, InitScheme::kZeros, d);
  return p;
}

/// Snapshot file: "SARM-PARAMS v1\n", u32 section count, then per section
/// u32 name length, name bytes, u32 rows, u32 cols and rows*cols f32 values
/// (row-major). All integers and floats little-endian.
void save_params(const ModelParams<float>& params, const std::filesystem::path& path);
std::string serialize_params(const ModelParams<float>& params);
/// Loads into tensors shaped by `cfg`; throws FormatError on any mismatch.
ModelParams<float> load_params(const ModelConfig& cfg, const std::filesystem::path& path);

}  // namespace sarm
