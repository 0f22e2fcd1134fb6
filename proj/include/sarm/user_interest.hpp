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

#include <cstdint>
#include <span>
#include <vector>

#include "sarm/encoder.hpp"
#include "sarm/memory_bank.hpp"
#include "sarm/model.hpp"

namespace sarm {

inline constexpr int kDefaultHistoryLength = 20;

/// The m most recent effectively-viewed authors, left-padded; rows hold the
/// bank's h_cls at retrieval time.
struct UserHistory {
  std::vector<uint64_t> author_ids;  // real entries only, most recent last
  Mat<float> rows;                   // m x d
  KeyMask valid;                     // m entries
};

/// Retrieves the last `m` ids (chronological input) from the bank. Ids
/// missing from the bank yield the bank's default row, still marked valid.
UserHistory build_history(std::span<const uint64_t> chronological_ids, const MemoryBank& bank, int m);

/// Same, starting from past events: keeps authors whose long-view label is 1.
struct ViewedAuthor {
  uint64_t author_id;
  bool long_view;
};
UserHistory build_history(std::span<const ViewedAuthor> past_events, const MemoryBank& bank, int m);

template <typename Scalar>
struct UserCache {
  std::vector<BlockCache<Scalar>> blocks;
  Mat<Scalar> out;
  int valid_count = 0;
};

/// Transformer over the history rows, then mean over valid rows. A history
/// with no valid row gives the zero vector.
template <typename Scalar>
RowVec<Scalar> user_interest(const Mat<Scalar>& rows, const KeyMask& valid, const ModelParams<Scalar>& p,
                             UserCache<Scalar>* cache = nullptr) {
  int count = 0;
  for (auto v : valid) count += v ? 1 : 0;
  if (cache) cache->valid_count = count;
  if (count == 0) return RowVec<Scalar>::Zero(rows.cols());
  UserCache<Scalar> local;
  UserCache<Scalar>& c = cache ? *cache : local;
  c.blocks.assign(p.user_blocks.size(), {});
  Mat<Scalar> x = rows;
  for (std::size_t b = 0; b < p.user_blocks.size(); ++b) block_forward(p.user_blocks[b], x, valid, &c.blocks[b]);
  RowVec<Scalar> pooled = RowVec<Scalar>::Zero(rows.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    if (valid[static_cast<std::size_t>(i)]) pooled += x.row(i);
  c.out = std::move(x);
  return pooled / Scalar(count);
}

/// Gradients reach the user-side transformer only; the retrieved rows are
/// constants.
template <typename Scalar>
void user_interest_backward(const KeyMask& valid, const ModelParams<Scalar>& p, const UserCache<Scalar>& c,
                            const RowVec<Scalar>& d_pooled, ModelParams<Scalar>& g) {
  if (c.valid_count == 0) return;
  Mat<Scalar> d = Mat<Scalar>::Zero(c.out.rows(), c.out.cols());
  for (Eigen::Index i = 0; i < d.rows(); ++i)
    if (valid[static_cast<std::size_t>(i)]) d.row(i) = d_pooled / Scalar(c.valid_count);
  for (std::size_t b = p.user_blocks.size(); b-- > 0;) d = block_backward(p.user_blocks[b], c.blocks[b], d, g.user_blocks[b]);
}

}  // namespace sarm
