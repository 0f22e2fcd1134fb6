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

#include "sarm/anchor.hpp"

#include <fstream>
#include <set>
#include <unordered_set>

#include "sarm/errors.hpp"
#include "sarm/rng.hpp"
#include "sarm/text.hpp"

namespace sarm {
namespace {

constexpr std::array<std::string_view, 3> kReservedStrings = {kClsToken, kSepToken, kPadToken};

std::string collapse_spaces(std::string_view s) {
  return text::join(text::split_whitespace(s), " ");
}

void check_phrase(const std::string& phrase, Dimension dim) {
  for (auto r : kReservedStrings) {
    if (phrase.find(r) != std::string::npos)
      throw FormatError("phrase '" + phrase + "' in " + std::string(kDimensionLabels[static_cast<int>(dim)]) +
                        " contains delimiter " + std::string(r));
  }
  if (phrase.find(',') != std::string::npos)
    throw FormatError("phrase '" + phrase + "' contains the list separator ','");
  if (phrase.empty()) throw FormatError("empty phrase");
}

}  // namespace

std::optional<Dimension> dimension_from_label(std::string_view label) {
  for (std::size_t i = 0; i < kNumDimensions; ++i)
    if (kDimensionLabels[i] == label) return static_cast<Dimension>(i);
  return std::nullopt;
}

SemanticAnchor canonicalize(const SemanticAnchor& anchor) {
  SemanticAnchor out;
  for (std::size_t d = 0; d < kNumDimensions; ++d) {
    std::unordered_set<std::string> seen;
    for (const auto& raw : anchor.fields[d]) {
      std::string p = collapse_spaces(raw);
      if (p.empty() || !seen.insert(p).second) continue;
      out.fields[d].push_back(std::move(p));
    }
  }
  return out;
}

void validate(const SemanticAnchor& anchor) {
  for (std::size_t d = 0; d < kNumDimensions; ++d) {
    const auto dim = static_cast<Dimension>(d);
    for (const auto& p : anchor.fields[d]) check_phrase(p, dim);
    if (anchor.fields[d].size() > kDimensionCaps[d])
      throw FormatError(std::string(kDimensionLabels[d]) + " holds " + std::to_string(anchor.fields[d].size()) +
                        " phrases, cap is " + std::to_string(kDimensionCaps[d]));
  }
}

std::string render_anchor(const SemanticAnchor& anchor) {
  const SemanticAnchor canon = canonicalize(anchor);
  validate(canon);
  std::string out(kClsToken);
  for (std::size_t d = 0; d < kNumDimensions; ++d) {
    out += d == 0 ? " " : " [SEP] ";
    out += kDimensionLabels[d];
    out += ':';
    if (!canon.fields[d].empty()) {
      out += ' ';
      out += text::join(canon.fields[d], ", ");
    }
  }
  return out;
}

SemanticAnchor parse_anchor(std::string_view input) {
  std::string_view s = text::trim(input);
  if (!s.starts_with(kClsToken)) throw ParseError("missing [CLS] prefix in '" + std::string(s.substr(0, 32)) + "'");
  s.remove_prefix(kClsToken.size());
  s = text::trim(s);
  while (s.ends_with(kPadToken)) {
    s.remove_suffix(kPadToken.size());
    s = text::trim(s);
  }

  const auto segments = text::split(s, kSepToken);
  SemanticAnchor anchor;
  for (std::size_t idx = 0; idx < segments.size(); ++idx) {
    const std::string_view seg = text::trim(segments[idx]);
    const auto colon = seg.find(':');
    const auto dim = colon == std::string_view::npos ? std::nullopt : dimension_from_label(seg.substr(0, colon));
    if (!dim) throw ParseError("unknown dimension label in segment '" + std::string(seg) + "'");
    if (static_cast<std::size_t>(*dim) != idx)
      throw ParseError("dimension out of order in segment '" + std::string(seg) + "'");
    const std::string_view body = text::trim(seg.substr(colon + 1));
    if (body.empty()) continue;
    for (const auto& piece : text::split(body, ",")) {
      std::string phrase = collapse_spaces(piece);
      if (phrase.empty()) throw ParseError("empty phrase in segment '" + std::string(seg) + "'");
      anchor[*dim].push_back(std::move(phrase));
    }
  }
  if (segments.size() != kNumDimensions)
    throw ParseError("expected " + std::to_string(kNumDimensions) + " dimensions, found " +
                     std::to_string(segments.size()));
  SemanticAnchor canon = canonicalize(anchor);
  try {
    validate(canon);
  } catch (const FormatError& e) {
    throw ParseError(e.what());
  }
  return canon;
}

// ---------------------------------------------------------------------------
// Phrase bank

PhraseBank::PhraseBank(int topics) : cells_(static_cast<std::size_t>(std::max(topics, 0))) {}

void PhraseBank::add(int topic, Dimension dim, std::string phrase) {
  if (topic < 0) throw ConfigError("negative topic");
  phrase = collapse_spaces(phrase);
  check_phrase(phrase, dim);
  if (static_cast<std::size_t>(topic) >= cells_.size()) cells_.resize(topic + 1);
  const auto [it, inserted] = provenance_.emplace(phrase, topic);
  if (!inserted) throw ConfigError("phrase '" + phrase + "' appears in more than one cell");
  cells_[topic][static_cast<int>(dim)].push_back(std::move(phrase));
}

const std::vector<std::string>& PhraseBank::cell(int topic, Dimension dim) const {
  if (topic < 0 || static_cast<std::size_t>(topic) >= cells_.size() ||
      cells_[topic][static_cast<int>(dim)].empty())
    throw ConfigError("phrase bank has no cell for topic " + std::to_string(topic) + ", dimension " +
                      std::string(kDimensionLabels[static_cast<int>(dim)]));
  return cells_[topic][static_cast<int>(dim)];
}

std::optional<int> PhraseBank::topic_of(const std::string& phrase) const {
  const auto it = provenance_.find(phrase);
  if (it == provenance_.end()) return std::nullopt;
  return it->second;
}

void PhraseBank::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MissingFileError("cannot write " + path.string());
  for (std::size_t t = 0; t < cells_.size(); ++t)
    for (std::size_t d = 0; d < kNumDimensions; ++d)
      for (const auto& p : cells_[t][d]) out << t << '\t' << kDimensionLabels[d] << '\t' << p << '\n';
}

PhraseBank PhraseBank::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFileError("cannot open " + path.string());
  PhraseBank bank;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cols = text::split(line, "\t");
    const auto dim = cols.size() == 3 ? dimension_from_label(cols[1]) : std::nullopt;
    if (!dim) throw FormatError(path.string() + ":" + std::to_string(lineno) + ": malformed phrase bank line");
    bank.add(std::stoi(cols[0]), *dim, cols[2]);
  }
  return bank;
}

// ---------------------------------------------------------------------------
// Synthetic anchors

namespace {

// Phrase counts drawn per dimension, inclusive ranges within the caps.
constexpr std::array<std::pair<int, int>, kNumDimensions> kPhraseCountRange = {
    std::pair{1, 3}, std::pair{1, 1}, std::pair{1, 2}, std::pair{1, 2}, std::pair{1, 2}, std::pair{1, 2}};

}  // namespace

SemanticAnchor synth_anchor(const AuthorProfile& profile, const PhraseBank& bank, uint64_t seed, double p_topic) {
  const int topics = bank.topics();
  if (topics < 1) throw ConfigError("phrase bank is empty");
  for (int t = 0; t < topics; ++t)
    for (std::size_t d = 0; d < kNumDimensions; ++d)
      if (bank.cell(t, static_cast<Dimension>(d)).size() < kMinPhrasesPerCell)
        throw ConfigError("phrase bank cell (" + std::to_string(t) + ", " + std::string(kDimensionLabels[d]) +
                          ") has fewer than " + std::to_string(kMinPhrasesPerCell) + " phrases");
  if (profile.latent_topic < 0 || profile.latent_topic >= topics)
    throw ConfigError("latent topic outside phrase bank");

  Rng rng(mix_seed(seed, profile.author_id));
  SemanticAnchor anchor;
  for (std::size_t d = 0; d < kNumDimensions; ++d) {
    const auto dim = static_cast<Dimension>(d);
    const auto [lo, hi] = kPhraseCountRange[d];
    const int count = lo + static_cast<int>(rng.index(static_cast<uint64_t>(hi - lo + 1)));
    std::set<std::string> chosen;
    for (int k = 0; k < count; ++k) {
      int topic = profile.latent_topic;
      if (topics > 1 && !rng.bernoulli(p_topic)) {
        topic = static_cast<int>(rng.index(static_cast<uint64_t>(topics - 1)));
        if (topic >= profile.latent_topic) ++topic;
      }
      // Without replacement within a dimension so provenance rates stay exact.
      std::vector<const std::string*> remaining;
      for (const auto& p : bank.cell(topic, dim))
        if (!chosen.contains(p)) remaining.push_back(&p);
      const std::string& pick = *remaining[rng.index(remaining.size())];
      chosen.insert(pick);
      anchor[dim].push_back(pick);
    }
  }
  return anchor;
}

namespace {

constexpr std::array<std::array<std::string_view, 6>, kNumDimensions> kGenericWords = {{
    {"corner", "plaza", "studio", "market", "street", "harbor"},
    {"tour", "night", "challenge", "session", "story", "marathon"},
    {"tips", "review", "talk", "guide", "news", "battle"},
    {"fans", "students", "parents", "gamers", "locals", "travelers"},
    {"solo", "duet", "panel", "demo", "stream", "contest"},
    {"indoor", "outdoor", "kitchen", "stage", "garden", "rooftop"},
}};

std::string pseudo_word(Rng& rng) {
  static constexpr std::string_view kConsonants = "bdfgklmnprstvz";
  static constexpr std::string_view kVowels = "aeiou";
  const int syllables = 2 + static_cast<int>(rng.index(2));
  std::string w;
  for (int s = 0; s < syllables; ++s) {
    w += kConsonants[rng.index(kConsonants.size())];
    w += kVowels[rng.index(kVowels.size())];
  }
  return w;
}

}  // namespace

PhraseBank generate_phrase_bank(int topics, uint64_t seed, std::size_t per_cell) {
  if (topics < 1) throw ConfigError("topics must be positive");
  if (per_cell < kMinPhrasesPerCell || per_cell > 36)
    throw ConfigError("per_cell must lie in [5, 36]");
  Rng rng(mix_seed(seed, 0x5048524153ULL));
  constexpr std::size_t kWordsPerTopic = 8;
  std::unordered_set<std::string> used;
  for (const auto& row : kGenericWords)
    for (auto w : row) used.emplace(w);

  std::vector<std::vector<std::string>> topic_words(topics);
  for (int t = 0; t < topics; ++t) {
    while (topic_words[t].size() < kWordsPerTopic) {
      std::string w = pseudo_word(rng);
      if (used.insert(w).second) topic_words[t].push_back(std::move(w));
    }
  }

  PhraseBank bank(topics);
  for (int t = 0; t < topics; ++t) {
    for (std::size_t d = 0; d < kNumDimensions; ++d) {
      std::set<std::string> cell;
      while (cell.size() < per_cell) {
        const auto& tw = topic_words[t][rng.index(kWordsPerTopic)];
        const auto gw = kGenericWords[d][rng.index(kGenericWords[d].size())];
        cell.insert(tw + " " + std::string(gw));
      }
      for (const auto& p : cell) bank.add(t, static_cast<Dimension>(d), p);
    }
  }
  return bank;
}

void write_anchor_corpus(const std::filesystem::path& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MissingFileError("cannot write " + path.string());
  for (const auto& l : lines) out << l << '\n';
}

std::vector<std::string> read_anchor_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFileError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) lines.push_back(line);
  return lines;
}

}  // namespace sarm
