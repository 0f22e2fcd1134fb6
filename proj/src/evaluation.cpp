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

#include "sarm/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>

#include "sarm/encoder.hpp"
#include "sarm/errors.hpp"
#include "sarm/text.hpp"

namespace sarm {
namespace {

std::string fmt_metric(const std::optional<double>& v) {
  if (!v) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", *v);
  return buf;
}

// Twice the number of (positive, negative) pairs ordered correctly, ties
// counting one; integer arithmetic keeps the result exact.
std::optional<double> auc_of(const std::vector<std::pair<double, int>>& items) {
  uint64_t pos = 0, neg = 0;
  for (const auto& [s, l] : items) (l ? pos : neg) += 1;
  if (pos == 0 || neg == 0) return std::nullopt;
  std::vector<std::pair<double, int>> sorted = items;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  uint64_t twice = 0, neg_below = 0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    uint64_t p = 0, n = 0;
    while (j < sorted.size() && sorted[j].first == sorted[i].first) {
      (sorted[j].second ? p : n) += 1;
      ++j;
    }
    twice += 2 * p * neg_below + p * n;
    neg_below += n;
    i = j;
  }
  return static_cast<double>(twice) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

void check_inputs(std::size_t labels, std::size_t scores, std::span<const double> s) {
  if (labels != scores) throw ShapeError("metric inputs differ in length");
  for (double v : s)
    if (!std::isfinite(v)) throw NumericError("metric input contains a non-finite score");
}

}  // namespace

std::optional<double> auc(std::span<const int> labels, std::span<const double> scores) {
  check_inputs(labels.size(), scores.size(), scores);
  std::vector<std::pair<double, int>> items;
  items.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) items.emplace_back(scores[i], labels[i] != 0);
  return auc_of(items);
}

std::optional<double> gauc(std::span<const uint64_t> users, std::span<const int> labels,
                           std::span<const double> scores) {
  check_inputs(labels.size(), scores.size(), scores);
  if (users.size() != labels.size()) throw ShapeError("gauc: users and labels differ in length");
  std::map<uint64_t, std::vector<std::pair<double, int>>> groups;
  for (std::size_t i = 0; i < users.size(); ++i) groups[users[i]].emplace_back(scores[i], labels[i] != 0);
  double num = 0, den = 0;
  for (const auto& [user, items] : groups) {
    const auto a = auc_of(items);
    if (!a) continue;
    const double w = static_cast<double>(items.size());
    num += w * *a;
    den += w;
  }
  if (den == 0) return std::nullopt;
  return num / den;
}

std::unordered_map<uint64_t, uint64_t> exposure_counts(std::span<const InteractionEvent> train) {
  std::unordered_map<uint64_t, uint64_t> counts;
  for (const auto& e : train) ++counts[e.author_id];
  return counts;
}

void validate_bucket_edges(std::span<const uint64_t> edges) {
  if (edges.empty() || edges.front() != 0) throw ConfigError("bucket edges must start at 0");
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (edges[i] <= edges[i - 1]) throw ConfigError("bucket edges must increase strictly");
}

EvalReport stratified_eval(std::span<const InteractionEvent> test, std::span<const TaskScores> scores,
                           const std::unordered_map<uint64_t, uint64_t>& exposure, std::span<const uint64_t> edges) {
  validate_bucket_edges(edges);
  if (test.size() != scores.size()) throw ShapeError("stratified_eval: events and scores differ in length");

  struct Slice {
    std::vector<uint64_t> users;
    std::array<std::vector<int>, kNumTasks> labels;
    std::array<std::vector<double>, kNumTasks> scores;
    std::set<uint64_t> authors;
    void add(const InteractionEvent& e, const TaskScores& s) {
      users.push_back(e.user_id);
      authors.insert(e.author_id);
      for (std::size_t t = 0; t < kNumTasks; ++t) {
        labels[t].push_back(e.labels[t]);
        scores[t].push_back(s[t]);
      }
    }
    std::array<TaskMetric, kNumTasks> metrics() const {
      std::array<TaskMetric, kNumTasks> m{};
      for (std::size_t t = 0; t < kNumTasks; ++t) {
        m[t].auc = auc(labels[t], scores[t]);
        m[t].gauc = gauc(users, labels[t], scores[t]);
      }
      return m;
    }
  };

  Slice all;
  std::vector<Slice> slices(edges.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto it = exposure.find(test[i].author_id);
    const uint64_t n = it == exposure.end() ? 0 : it->second;
    const auto b = static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), n) - edges.begin()) - 1;
    slices[b].add(test[i], scores[i]);
    all.add(test[i], scores[i]);
  }
  EvalReport report;
  report.events = test.size();
  report.overall = all.metrics();
  for (std::size_t b = 0; b < edges.size(); ++b) {
    BucketReport br;
    br.lo = edges[b];
    if (b + 1 < edges.size()) br.hi = edges[b + 1];
    br.events = slices[b].users.size();
    br.authors = slices[b].authors.size();
    br.tasks = slices[b].metrics();
    report.buckets.push_back(br);
  }
  return report;
}

std::string EvalReport::csv() const {
  std::string out = "scope,lo,hi,events,authors,task,auc,gauc\n";
  auto rows = [&](const std::string& scope, const std::string& lo, const std::string& hi, std::size_t ev,
                  const std::string& authors, const std::array<TaskMetric, kNumTasks>& m) {
    for (std::size_t t = 0; t < kNumTasks; ++t)
      out += scope + "," + lo + "," + hi + "," + std::to_string(ev) + "," + authors + "," + kTaskNames[t] + "," +
             fmt_metric(m[t].auc) + "," + fmt_metric(m[t].gauc) + "\n";
  };
  rows("all", "", "", events, "", overall);
  for (std::size_t b = 0; b < buckets.size(); ++b) {
    const auto& br = buckets[b];
    rows("bucket" + std::to_string(b), std::to_string(br.lo), br.hi ? std::to_string(*br.hi) : "inf", br.events,
         std::to_string(br.authors), br.tasks);
  }
  return out;
}

std::string EvalReport::table() const {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-14s %8s %8s", "scope", "events", "authors");
  out += buf;
  for (const char* name : kTaskNames) {
    std::snprintf(buf, sizeof buf, " %9s %9s", (std::string(name) + "_auc").c_str(),
                  (std::string(name) + "_gauc").c_str());
    out += buf;
  }
  out += '\n';
  auto line = [&](const std::string& scope, std::size_t ev, const std::string& authors,
                  const std::array<TaskMetric, kNumTasks>& m) {
    std::snprintf(buf, sizeof buf, "%-14s %8zu %8s", scope.c_str(), ev, authors.c_str());
    out += buf;
    for (const auto& tm : m) {
      std::snprintf(buf, sizeof buf, " %9s %9s", fmt_metric(tm.auc).c_str(), fmt_metric(tm.gauc).c_str());
      out += buf;
    }
    out += '\n';
  };
  line("all", events, "-", overall);
  for (const auto& br : buckets) {
    const std::string scope = "[" + std::to_string(br.lo) + "," + (br.hi ? std::to_string(*br.hi) : "inf") + ")";
    line(scope, br.events, std::to_string(br.authors), br.tasks);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Attribution

std::vector<double> rollout_importance(const std::vector<Mat<double>>& block_attention,
                                       const RowVec<double>& cross_row, const KeyMask& valid) {
  const auto n = cross_row.size();
  if (static_cast<std::size_t>(n) != valid.size()) throw ShapeError("rollout: mask length differs");
  Mat<double> r = Mat<double>::Identity(n, n);
  for (const auto& a : block_attention) {
    if (a.rows() != n || a.cols() != n) throw ShapeError("rollout: attention map shape differs");
    Mat<double> mixed = 0.5 * a + 0.5 * Mat<double>::Identity(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double s = mixed.row(i).sum();
      if (s > 0) mixed.row(i) /= s;
    }
    r = mixed * r;
  }
  const RowVec<double> imp = cross_row * r;
  std::vector<double> out;
  double total = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (!valid[static_cast<std::size_t>(j)]) continue;
    out.push_back(std::max(imp(j), 0.0));
    total += out.back();
  }
  if (out.empty()) return out;
  if (total > 0) {
    for (auto& w : out) w /= total;
  } else {
    std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(out.size()));
  }
  return out;
}

Attribution attention_attribution(const DualTokenization& dual, int slot, const ModelParams<float>& params,
                                  const FusionConfig& fusion) {
  EncoderCache<float> cache;
  const Mat<float> h = encode(dual, params, fusion, &cache);
  const KeyMask valid = pad_mask_of(dual.base_seq);
  TarCache<float> tar;
  author_tar(slot, h, valid, params, &tar);
  std::vector<Mat<double>> maps;
  for (const auto& b : cache.blocks) maps.push_back(b.attn_w.cast<double>());
  const RowVec<double> cross = tar.weights.row(0).cast<double>();
  Attribution a;
  a.weights = rollout_importance(maps, cross, valid);
  for (std::size_t i = 0; i < valid.size(); ++i) {
    if (!valid[i]) continue;
    a.positions.push_back(i);
    a.token_ids.push_back(dual.base_seq[i]);
  }
  return a;
}

std::string Attribution::to_tsv(const BaseVocab& vocab) const {
  std::string out;
  char buf[64];
  for (std::size_t i = 0; i < weights.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.9g", weights[i]);
    out += vocab.token(token_ids[i]) + "\t" + buf + "\n";
  }
  return out;
}

std::vector<TokenRoleInfo> anchor_token_roles(const SemanticAnchor& anchor, const BaseVocab& vocab,
                                              std::size_t length) {
  const SemanticAnchor canon = canonicalize(anchor);
  std::vector<TokenRoleInfo> roles;
  auto emit = [&](std::string_view word, TokenRoleInfo info) {
    const auto n = tokenize_words(word, vocab).size();
    for (std::size_t i = 0; i < n; ++i) roles.push_back(info);
  };
  emit(kClsToken, {TokenRole::kSpecial, -1, {}});
  for (std::size_t d = 0; d < kNumDimensions; ++d) {
    const int dim = static_cast<int>(d);
    if (d > 0) emit(kSepToken, {TokenRole::kSpecial, dim, {}});
    for (const auto& w : text::split_whitespace(std::string(kDimensionLabels[d]) + ":"))
      emit(w, {TokenRole::kLabel, dim, {}});
    const auto& phrases = canon.fields[d];
    for (std::size_t i = 0; i < phrases.size(); ++i) {
      for (const auto& w : text::split_whitespace(phrases[i])) emit(w, {TokenRole::kPhrase, dim, phrases[i]});
      if (i + 1 < phrases.size()) emit(",", {TokenRole::kSeparator, dim, {}});
    }
  }
  if (roles.size() != tokenize_words(render_anchor(canon), vocab).size())
    throw FormatError("anchor_token_roles: role layout disagrees with tokenization");
  roles.resize(length, TokenRoleInfo{});
  return roles;
}

// ---------------------------------------------------------------------------
// Retrieval

std::vector<Neighbor> a2a_retrieve(uint64_t query, const MemoryBank& bank, std::size_t k) {
  if (!bank.contains(query)) throw ConfigError("author " + std::to_string(query) + " is not in the memory bank");
  if (k == 0) return {};
  const auto q = bank.get(query).h_cls;
  double qq = 0;
  for (float v : q) qq += static_cast<double>(v) * v;
  std::vector<Neighbor> all;
  for (auto id : bank.ids()) {
    if (id == query) continue;
    const auto c = bank.get(id).h_cls;
    double dot = 0, cc = 0;
    for (std::size_t i = 0; i < c.size(); ++i) {
      dot += static_cast<double>(q[i]) * c[i];
      cc += static_cast<double>(c[i]) * c[i];
    }
    const double denom = std::sqrt(qq * cc);
    all.push_back({id, denom > 0 ? dot / denom : 0.0});
  }
  std::sort(all.begin(), all.end(), [](const Neighbor& a, const Neighbor& b) {
    return a.similarity != b.similarity ? a.similarity > b.similarity : a.author_id < b.author_id;
  });
  if (all.size() > k) all.resize(k);
  return all;
}

}  // namespace sarm
