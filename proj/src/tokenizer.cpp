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

#include "sarm/tokenizer.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "sarm/anchor.hpp"
#include "sarm/errors.hpp"
#include "sarm/text.hpp"

namespace sarm {
namespace {

constexpr std::array<std::string_view, kNumReserved> kReservedTokens = {kPadToken, kClsToken, kSepToken,
                                                                        kUnkToken};

std::optional<TokenId> reserved_id(std::string_view word) {
  for (TokenId i = 0; i < kNumReserved; ++i)
    if (kReservedTokens[i] == word) return i;
  return std::nullopt;
}

std::vector<std::string> pieces_of(std::string_view word) {
  const auto chars = text::utf8_chars(word);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < chars.size(); i += 2) out.push_back(i + 1 < chars.size() ? chars[i] + chars[i + 1] : chars[i]);
  return out;
}

template <typename Map>
std::vector<std::pair<std::string, uint64_t>> ranked(const Map& counts) {
  std::vector<std::pair<std::string, uint64_t>> v(counts.begin(), counts.end());
  std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  return v;
}

}  // namespace

std::vector<std::string> pretokenize(std::string_view text) {
  std::vector<std::string> out;
  for (auto& word : text::split_whitespace(text)) {
    std::size_t commas = 0;
    while (commas < word.size() && word[word.size() - 1 - commas] == ',') ++commas;
    if (commas == word.size()) {
      for (std::size_t i = 0; i < commas; ++i) out.emplace_back(",");
      continue;
    }
    out.push_back(word.substr(0, word.size() - commas));
    for (std::size_t i = 0; i < commas; ++i) out.emplace_back(",");
  }
  return out;
}

// ---------------------------------------------------------------------------
// BaseVocab

BaseVocab::BaseVocab() {
  for (auto t : kReservedTokens) push(std::string(t));
}

void BaseVocab::push(std::string token) {
  const auto id = static_cast<TokenId>(tokens_.size());
  if (ids_.emplace(token, id).second) tokens_.push_back(std::move(token));
}

BaseVocab BaseVocab::build(const std::vector<std::string>& corpus, std::size_t max_size) {
  if (max_size < 8) throw ConfigError("base vocab max_size must be >= 8, got " + std::to_string(max_size));
  std::map<std::string, uint64_t> word_counts;
  for (const auto& line : corpus)
    for (auto& w : pretokenize(line))
      if (!reserved_id(w)) ++word_counts[w];
  if (word_counts.empty()) throw ConfigError("base vocab corpus contains no words");

  const auto words = ranked(word_counts);
  const std::size_t keep = std::min(words.size(), max_size - kNumReserved);
  BaseVocab vocab;
  std::map<std::string, uint64_t> piece_counts;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i < keep) {
      vocab.push(words[i].first);
    } else {
      for (auto& p : pieces_of(words[i].first)) piece_counts[p] += words[i].second;
    }
  }
  for (auto& [piece, count] : ranked(piece_counts)) vocab.push(piece);
  return vocab;
}

std::optional<TokenId> BaseVocab::find(std::string_view token) const {
  const auto it = ids_.find(std::string(token));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

std::string BaseVocab::serialize() const {
  std::string out;
  for (std::size_t i = 0; i < tokens_.size(); ++i) out += tokens_[i] + "\t" + std::to_string(i) + "\n";
  return out;
}

uint64_t BaseVocab::hash() const { return text::fnv1a(serialize()); }

void BaseVocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MissingFileError("cannot write " + path.string());
  out << serialize();
}

BaseVocab BaseVocab::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFileError("cannot open " + path.string());
  BaseVocab vocab;
  vocab.tokens_.clear();
  vocab.ids_.clear();
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto cols = text::split(line, "\t");
    if (cols.size() != 2 || cols[0].empty() || cols[1] != std::to_string(lineno - 1))
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected 'token<TAB>" +
                        std::to_string(lineno - 1) + "'");
    vocab.push(cols[0]);
    if (vocab.tokens_.size() != lineno) throw FormatError(path.string() + ": duplicate token " + cols[0]);
  }
  if (vocab.tokens_.size() < static_cast<std::size_t>(kNumReserved))
    throw FormatError(path.string() + ": missing reserved tokens");
  for (TokenId i = 0; i < kNumReserved; ++i)
    if (vocab.tokens_[i] != kReservedTokens[i]) throw FormatError(path.string() + ": reserved ids out of place");
  return vocab;
}

std::vector<TokenId> tokenize_words(std::string_view text, const BaseVocab& vocab) {
  std::vector<TokenId> ids;
  for (const auto& word : pretokenize(text)) {
    if (auto r = reserved_id(word)) {
      ids.push_back(*r);
    } else if (auto id = vocab.find(word)) {
      ids.push_back(*id);
    } else {
      for (const auto& p : pieces_of(word)) ids.push_back(vocab.find(p).value_or(kUnkId));
    }
  }
  return ids;
}

std::vector<TokenId> tokenize_base(std::string_view text, const BaseVocab& vocab, std::size_t length) {
  auto ids = tokenize_words(text, vocab);
  ids.resize(length, kPadId);
  return ids;
}

// ---------------------------------------------------------------------------
// MergeTable

MergeTable::MergeTable(const BaseVocab& vocab)
    : base_hash_(vocab.hash()), base_size_(vocab.size()), surfaces_(vocab.tokens()) {
  parts_.assign(surfaces_.size(), {-1, -1});
  for (std::size_t i = 0; i < surfaces_.size(); ++i) ids_.emplace(surfaces_[i], static_cast<TokenId>(i));
}

std::optional<TokenId> MergeTable::find(std::string_view surface) const {
  const auto it = ids_.find(std::string(surface));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

TokenId MergeTable::add_merge_with_surface(TokenId left, TokenId right, uint64_t count, std::string surface) {
  if (is_reserved(left) || is_reserved(right)) throw ConfigError("merges may not involve reserved tokens");
  const auto id = static_cast<TokenId>(surfaces_.size());
  if (!ids_.emplace(surface, id).second) throw FormatError("duplicate merged token surface '" + surface + "'");
  surfaces_.push_back(std::move(surface));
  parts_.emplace_back(left, right);
  merges_.push_back({left, right, id, count});
  return id;
}

TokenId MergeTable::add_merge(TokenId left, TokenId right, uint64_t count) {
  const std::string base = surface(left) + surface(right);
  std::string candidate = base;
  for (int n = 1; ids_.contains(candidate); ++n) candidate = base + "#" + std::to_string(n);
  return add_merge_with_surface(left, right, count, std::move(candidate));
}

std::vector<TokenId> MergeTable::expand(TokenId id) const {
  const auto [l, r] = parts_.at(static_cast<std::size_t>(id));
  if (l < 0) return {id};
  auto out = expand(l);
  const auto tail = expand(r);
  out.insert(out.end(), tail.begin(), tail.end());
  return out;
}

void apply_merge(std::vector<TokenId>& seq, const Merge& merge, std::vector<int>* spans) {
  std::size_t w = 0;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (i + 1 < seq.size() && seq[i] == merge.left && seq[i + 1] == merge.right) {
      seq[w] = merge.merged;
      if (spans) (*spans)[w] = (*spans)[i] + (*spans)[i + 1];
      ++i;
    } else {
      seq[w] = seq[i];
      if (spans) (*spans)[w] = (*spans)[i];
    }
    ++w;
  }
  seq.resize(w);
  if (spans) spans->resize(w);
}

void MergeTable::apply(std::vector<TokenId>& seq, std::vector<int>* spans) const {
  for (const auto& m : merges_) apply_merge(seq, m, spans);
}

std::string MergeTable::serialize() const {
  char header[64];
  std::snprintf(header, sizeof header, "SARM-MERGES v1 %016" PRIx64 "\n", base_hash_);
  std::string out = header;
  for (const auto& m : merges_)
    out += surface(m.left) + "\t" + surface(m.right) + "\t" + surface(m.merged) + "\t" + std::to_string(m.count) + "\n";
  return out;
}

void MergeTable::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MissingFileError("cannot write " + path.string());
  out << serialize();
}

MergeTable MergeTable::load(const std::filesystem::path& path, const BaseVocab& vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFileError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || !line.starts_with("SARM-MERGES v1 "))
    throw FormatError(path.string() + ": bad merge table header");
  const std::string hash_hex = line.substr(15);
  uint64_t hash = 0;
  try {
    hash = std::stoull(hash_hex, nullptr, 16);
  } catch (const std::exception&) {
    throw FormatError(path.string() + ": bad vocab hash in header");
  }
  if (hash != vocab.hash()) throw FormatError(path.string() + ": merge table was trained on a different base vocab");
  MergeTable table(vocab);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cols = text::split(line, "\t");
    const auto where = path.string() + ":" + std::to_string(lineno);
    if (cols.size() != 4) throw FormatError(where + ": expected 4 tab-separated fields");
    const auto l = table.find(cols[0]);
    const auto r = table.find(cols[1]);
    if (!l || !r) throw FormatError(where + ": merge references unknown token");
    uint64_t count = 0;
    try {
      count = std::stoull(cols[3]);
    } catch (const std::exception&) {
      throw FormatError(where + ": bad count");
    }
    table.add_merge_with_surface(*l, *r, count, cols[2]);
  }
  return table;
}

// ---------------------------------------------------------------------------
// Training

namespace {

void continue_training(MergeTable& table, std::vector<std::vector<TokenId>> seqs, uint64_t threshold,
                       std::size_t max_new) {
  if (threshold < 1) throw ConfigError("BPE threshold must be >= 1");
  for (std::size_t added = 0; added < max_new; ++added) {
    std::unordered_map<uint64_t, uint64_t> counts;
    for (const auto& s : seqs)
      for (std::size_t i = 0; i + 1 < s.size(); ++i) {
        if (is_reserved(s[i]) || is_reserved(s[i + 1])) continue;
        ++counts[(static_cast<uint64_t>(static_cast<uint32_t>(s[i])) << 32) | static_cast<uint32_t>(s[i + 1])];
      }
    bool found = false;
    TokenId best_l = 0, best_r = 0;
    uint64_t best_count = 0;
    for (const auto& [key, count] : counts) {
      if (count < threshold) continue;
      const auto l = static_cast<TokenId>(key >> 32);
      const auto r = static_cast<TokenId>(key & 0xffffffffu);
      bool better = !found || count > best_count;
      if (found && count == best_count) {
        const auto& ls = table.surface(l);
        const auto& bs = table.surface(best_l);
        better = ls != bs ? ls < bs : table.surface(r) < table.surface(best_r);
      }
      if (better) {
        found = true;
        best_l = l;
        best_r = r;
        best_count = count;
      }
    }
    if (!found) return;
    const TokenId u = table.add_merge(best_l, best_r, best_count);
    const Merge m{best_l, best_r, u, best_count};
    for (auto& s : seqs) apply_merge(s, m);
  }
}

}  // namespace

MergeTable train_bpe_merges(const std::vector<std::vector<TokenId>>& corpus, const BaseVocab& vocab,
                            uint64_t threshold, std::size_t max_merges) {
  MergeTable table(vocab);
  continue_training(table, corpus, threshold, max_merges);
  return table;
}

MergeTable incremental_update(const MergeTable& merges, const BaseVocab& vocab,
                              const std::vector<std::vector<TokenId>>& new_corpus, uint64_t threshold,
                              std::size_t max_new) {
  if (merges.base_vocab_hash() != vocab.hash())
    throw ConfigError("incremental update: merge table was trained on a different base vocab");
  MergeTable out = merges;
  std::vector<std::vector<TokenId>> seqs = new_corpus;
  for (auto& s : seqs) out.apply(s);
  continue_training(out, std::move(seqs), threshold, max_new);
  return out;
}

DualTokenization dual_from_base(std::vector<TokenId> base_seq, const MergeTable& merges) {
  DualTokenization dual;
  dual.base_seq = std::move(base_seq);
  const std::size_t n = dual.base_seq.size();
  std::size_t content = n;
  while (content > 0 && dual.base_seq[content - 1] == kPadId) --content;
  dual.ext_seq.assign(dual.base_seq.begin(), dual.base_seq.begin() + static_cast<std::ptrdiff_t>(content));
  std::vector<int> spans(content, 1);
  merges.apply(dual.ext_seq, &spans);
  dual.align.assign(n, kPadId);
  std::size_t pos = 0;
  for (std::size_t t = 0; t < dual.ext_seq.size(); ++t)
    for (int k = 0; k < spans[t]; ++k) dual.align[pos++] = dual.ext_seq[t];
  return dual;
}

DualTokenization tokenize_dual(std::string_view text, const BaseVocab& vocab, const MergeTable& merges,
                               std::size_t length) {
  return dual_from_base(tokenize_base(text, vocab, length), merges);
}

}  // namespace sarm
