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

// Brute-force reference implementations shared by unit and acceptance tests.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sarm/tokenizer.hpp"

namespace sarm::oracle {

// Independent BPE: tokens are surface strings, pair counts live in an
// ordered map so the first maximal entry is the lexicographic tie winner.
inline std::vector<std::string> bpe_merges(const std::vector<std::vector<TokenId>>& corpus, const BaseVocab& vocab,
                                       uint64_t threshold, std::size_t max_merges) {
  std::set<std::string> names(vocab.tokens().begin(), vocab.tokens().end());
  std::vector<std::vector<std::string>> seqs;
  std::vector<std::vector<bool>> reserved;
  for (const auto& line : corpus) {
    seqs.emplace_back();
    reserved.emplace_back();
    for (TokenId t : line) {
      seqs.back().push_back(vocab.token(t));
      reserved.back().push_back(t < 4);
    }
  }
  std::vector<std::string> out;
  while (out.size() < max_merges) {
    std::map<std::pair<std::string, std::string>, uint64_t> counts;
    for (std::size_t s = 0; s < seqs.size(); ++s)
      for (std::size_t i = 0; i + 1 < seqs[s].size(); ++i)
        if (!reserved[s][i] && !reserved[s][i + 1]) ++counts[{seqs[s][i], seqs[s][i + 1]}];
    std::pair<std::string, std::string> best;
    uint64_t best_count = 0;
    for (const auto& [pair, c] : counts)
      if (c >= threshold && c > best_count) {
        best = pair;
        best_count = c;
      }
    if (best_count == 0) break;
    std::string name = best.first + best.second;
    for (int n = 1; names.contains(name); ++n) name = best.first + best.second + "#" + std::to_string(n);
    names.insert(name);
    out.push_back(name);
    for (std::size_t s = 0; s < seqs.size(); ++s) {
      std::vector<std::string> next;
      std::vector<bool> next_reserved;
      for (std::size_t i = 0; i < seqs[s].size(); ++i) {
        if (i + 1 < seqs[s].size() && !reserved[s][i] && !reserved[s][i + 1] && seqs[s][i] == best.first &&
            seqs[s][i + 1] == best.second) {
          next.push_back(name);
          next_reserved.push_back(false);
          ++i;
        } else {
          next.push_back(seqs[s][i]);
          next_reserved.push_back(reserved[s][i]);
        }
      }
      seqs[s] = std::move(next);
      reserved[s] = std::move(next_reserved);
    }
  }
  return out;
}

// Straight O(n^2) pair counting.
inline std::optional<double> pairwise_auc(const std::vector<int>& y, const std::vector<double>& s) {
  double good = 0, pairs = 0;
  for (std::size_t i = 0; i < y.size(); ++i)
    for (std::size_t j = 0; j < y.size(); ++j) {
      if (!(y[i] == 1 && y[j] == 0)) continue;
      pairs += 1;
      good += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
    }
  if (pairs == 0) return std::nullopt;
  return good / pairs;
}

inline std::optional<double> pairwise_gauc(const std::vector<uint64_t>& u, const std::vector<int>& y,
                                    const std::vector<double>& s) {
  std::map<uint64_t, std::pair<std::vector<int>, std::vector<double>>> g;
  for (std::size_t i = 0; i < u.size(); ++i) {
    g[u[i]].first.push_back(y[i]);
    g[u[i]].second.push_back(s[i]);
  }
  double num = 0, den = 0;
  for (const auto& [id, ys] : g) {
    const auto a = pairwise_auc(ys.first, ys.second);
    if (!a) continue;
    num += static_cast<double>(ys.first.size()) * *a;
    den += static_cast<double>(ys.first.size());
  }
  if (den == 0) return std::nullopt;
  return num / den;
}

}  // namespace sarm::oracle
