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

// Offline metrics and analysis: AUC/GAUC, exposure-stratified reports,
// attention attribution over anchor tokens and author-to-author retrieval.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "sarm/data_synth.hpp"
#include "sarm/memory_bank.hpp"
#include "sarm/model.hpp"
#include "sarm/ranking.hpp"
#include "sarm/tokenizer.hpp"

namespace sarm {

/// P(score_pos > score_neg) with ties counted one half. Empty when either
/// class is missing.
std::optional<double> auc(std::span<const int> labels, std::span<const double> scores);

/// Impression-weighted mean of per-user AUC over users with both classes;
/// users are visited in ascending id order. Empty when no user qualifies.
std::optional<double> gauc(std::span<const uint64_t> users, std::span<const int> labels,
                           std::span<const double> scores);

/// Lower edges of the exposure buckets; bucket i is [edges[i], edges[i+1]),
/// the last one is unbounded.
inline const std::vector<uint64_t> kDefaultBucketEdges = {0, 6, 10, 100, 1000};

/// Training impressions per author.
std::unordered_map<uint64_t, uint64_t> exposure_counts(std::span<const InteractionEvent> train);

struct TaskMetric {
  std::optional<double> auc;
  std::optional<double> gauc;
};

struct BucketReport {
  uint64_t lo = 0;
  std::optional<uint64_t> hi;  // empty for the open last bucket
  std::size_t events = 0;
  std::size_t authors = 0;
  std::array<TaskMetric, kNumTasks> tasks{};
};

struct EvalReport {
  std::size_t events = 0;
  std::array<TaskMetric, kNumTasks> overall{};
  std::vector<BucketReport> buckets;

  /// Long format: scope,lo,hi,events,authors,task,auc,gauc with "NA" for
  /// undefined metrics.
  std::string csv() const;
  std::string table() const;
};

/// Throws ConfigError unless edges start at 0 and increase strictly.
void validate_bucket_edges(std::span<const uint64_t> edges);

EvalReport stratified_eval(std::span<const InteractionEvent> test, std::span<const TaskScores> scores,
                           const std::unordered_map<uint64_t, uint64_t>& exposure,
                           std::span<const uint64_t> edges = kDefaultBucketEdges);

/// Rollout R = prod over blocks (last first) of row-normalised
/// (0.5 * A + 0.5 * I); importance = cross_row * R restricted to valid
/// columns and renormalised.
std::vector<double> rollout_importance(const std::vector<Mat<double>>& block_attention,
                                       const RowVec<double>& cross_row, const KeyMask& valid);

struct Attribution {
  std::vector<std::size_t> positions;  // non-pad base positions
  std::vector<TokenId> token_ids;
  std::vector<double> weights;  // sums to one

  /// token<TAB>weight lines.
  std::string to_tsv(const BaseVocab& vocab) const;
};

Attribution attention_attribution(const DualTokenization& dual, int slot, const ModelParams<float>& params,
                                  const FusionConfig& fusion);

/// Role of each base position of a rendered anchor.
enum class TokenRole { kSpecial, kLabel, kSeparator, kPhrase, kPad };
struct TokenRoleInfo {
  TokenRole role = TokenRole::kPad;
  int dimension = -1;
  std::string phrase;  // for kPhrase
};
std::vector<TokenRoleInfo> anchor_token_roles(const SemanticAnchor& anchor, const BaseVocab& vocab,
                                              std::size_t length);

struct Neighbor {
  uint64_t author_id = 0;
  double similarity = 0;
};

/// Cosine neighbours over h_cls, excluding the query; descending, ties by
/// ascending id. Throws ConfigError when the query is not in the bank.
std::vector<Neighbor> a2a_retrieve(uint64_t query, const MemoryBank& bank, std::size_t k);

}  // namespace sarm
