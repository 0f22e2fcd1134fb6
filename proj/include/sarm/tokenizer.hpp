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
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace sarm {

using TokenId = int32_t;

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kClsId = 1;
inline constexpr TokenId kSepId = 2;
inline constexpr TokenId kUnkId = 3;
inline constexpr TokenId kNumReserved = 4;

inline bool is_reserved(TokenId id) { return id < kNumReserved; }

/// Whitespace words with trailing commas split off as their own word.
std::vector<std::string> pretokenize(std::string_view text);

/// Base vocabulary: reserved tokens, the most frequent words, then the
/// 2-character pieces that rare words decompose into.
class BaseVocab {
 public:
  BaseVocab();

  /// Throws ConfigError when max_size < 8 or the corpus has no words.
  static BaseVocab build(const std::vector<std::string>& corpus, std::size_t max_size);

  std::size_t size() const { return tokens_.size(); }
  std::optional<TokenId> find(std::string_view token) const;
  const std::string& token(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::string serialize() const;
  uint64_t hash() const;
  void save(const std::filesystem::path& path) const;
  static BaseVocab load(const std::filesystem::path& path);

  bool operator==(const BaseVocab& o) const { return tokens_ == o.tokens_; }

 private:
  void push(std::string token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

/// Unpadded base token ids of `text`; unknown pieces map to [UNK].
std::vector<TokenId> tokenize_words(std::string_view text, const BaseVocab& vocab);

/// Base ids truncated or right-padded with [PAD] to exactly `length`.
std::vector<TokenId> tokenize_base(std::string_view text, const BaseVocab& vocab, std::size_t length);

struct Merge {
  TokenId left;
  TokenId right;
  TokenId merged;
  uint64_t count;  // corpus pair count when the merge was created

  bool operator==(const Merge&) const = default;
};

/// Ordered BPE merges over a base vocabulary. Extended ids 0..|base|-1 are
/// the base tokens; merged tokens follow in creation order.
class MergeTable {
 public:
  MergeTable() = default;
  explicit MergeTable(const BaseVocab& vocab);

  uint64_t base_vocab_hash() const { return base_hash_; }
  std::size_t base_size() const { return base_size_; }
  std::size_t ext_size() const { return surfaces_.size(); }
  const std::vector<Merge>& merges() const { return merges_; }
  const std::string& surface(TokenId id) const { return surfaces_.at(static_cast<std::size_t>(id)); }
  std::optional<TokenId> find(std::string_view surface) const;

  /// Appends merge (left, right); the new surface is the concatenation,
  /// suffixed with "#n" if that string already names a token.
  TokenId add_merge(TokenId left, TokenId right, uint64_t count);

  /// Base-token decomposition of an extended token.
  std::vector<TokenId> expand(TokenId id) const;

  /// Applies every merge in order; `spans` (same length as `seq`) tracks how
  /// many base positions each token covers.
  void apply(std::vector<TokenId>& seq, std::vector<int>* spans = nullptr) const;

  std::string serialize() const;
  void save(const std::filesystem::path& path) const;
  /// Throws FormatError when the header hash does not match `vocab`.
  static MergeTable load(const std::filesystem::path& path, const BaseVocab& vocab);

 private:
  TokenId add_merge_with_surface(TokenId left, TokenId right, uint64_t count, std::string surface);

  uint64_t base_hash_ = 0;
  std::size_t base_size_ = 0;
  std::vector<Merge> merges_;
  std::vector<std::string> surfaces_;
  std::vector<std::pair<TokenId, TokenId>> parts_;  // per extended id; (-1,-1) for base tokens
  std::unordered_map<std::string, TokenId> ids_;
};

/// Applies a single merge left to right, non-overlapping.
void apply_merge(std::vector<TokenId>& seq, const Merge& merge, std::vector<int>* spans = nullptr);

/// Thresholded BPE: repeatedly merges the most frequent adjacent pair (ties
/// by lexicographically smallest surfaces) while its count >= threshold.
/// Pairs involving reserved tokens are never counted.
MergeTable train_bpe_merges(const std::vector<std::vector<TokenId>>& corpus, const BaseVocab& vocab,
                            uint64_t threshold, std::size_t max_merges);

/// Re-segments `new_corpus` with the existing merges and appends up to
/// `max_new` new ones. Existing ids are unchanged.
MergeTable incremental_update(const MergeTable& merges, const BaseVocab& vocab,
                              const std::vector<std::vector<TokenId>>& new_corpus, uint64_t threshold,
                              std::size_t max_new);

/// Aligned base/extended tokenization.
struct DualTokenization {
  std::vector<TokenId> base_seq;  // length L, padded
  std::vector<TokenId> ext_seq;   // merged content tokens, no padding
  std::vector<TokenId> align;     // length L; extended id covering each base position
};

DualTokenization tokenize_dual(std::string_view text, const BaseVocab& vocab, const MergeTable& merges,
                               std::size_t length);

/// Dual tokenization of an already padded base sequence.
DualTokenization dual_from_base(std::vector<TokenId> base_seq, const MergeTable& merges);

}  // namespace sarm
