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

#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace sarm {

/// The six anchor dimensions, in their fixed rendering order.
enum class Dimension : int { kPoi = 0, kTheme, kTopic, kTargetAudience, kFormat, kScene };

inline constexpr std::size_t kNumDimensions = 6;
inline constexpr std::array<std::string_view, kNumDimensions> kDimensionLabels = {
    "POI", "Theme", "Topic", "Target audience", "Format", "Scene"};
inline constexpr std::size_t kUnbounded = std::numeric_limits<std::size_t>::max();
inline constexpr std::array<std::size_t, kNumDimensions> kDimensionCaps = {3, 1, 2, 2, kUnbounded,
                                                                           kUnbounded};

inline constexpr std::string_view kClsToken = "[CLS]";
inline constexpr std::string_view kSepToken = "[SEP]";
inline constexpr std::string_view kPadToken = "[PAD]";
inline constexpr std::string_view kUnkToken = "[UNK]";

std::optional<Dimension> dimension_from_label(std::string_view label);

/// Structured six-dimension description of a live author.
struct SemanticAnchor {
  std::array<std::vector<std::string>, kNumDimensions> fields;

  std::vector<std::string>& operator[](Dimension d) { return fields[static_cast<int>(d)]; }
  const std::vector<std::string>& operator[](Dimension d) const { return fields[static_cast<int>(d)]; }

  bool operator==(const SemanticAnchor&) const = default;
};

/// Single-spaced phrases, empties dropped, duplicates within a dimension
/// removed (first occurrence kept).
SemanticAnchor canonicalize(const SemanticAnchor& anchor);

/// Throws FormatError on delimiter-bearing phrases or cap violations.
void validate(const SemanticAnchor& anchor);

/// `[CLS] POI: p1, p2 [SEP] Theme: ... [SEP] Scene: ...` of the canonical form.
std::string render_anchor(const SemanticAnchor& anchor);

/// Inverse of render_anchor; trailing [PAD] runs are ignored. Throws
/// ParseError naming the offending segment.
SemanticAnchor parse_anchor(std::string_view text);

struct AuthorProfile {
  uint64_t author_id = 0;
  int latent_topic = 0;
  double popularity = 1.0;
  double identity_bias = 0.0;
  /// Fraction of the stream timeline at which the author starts streaming.
  double debut = 0.0;
};

/// Phrases per (topic, dimension) cell. Phrases are unique across cells so
/// that each phrase has a single provenance topic.
class PhraseBank {
 public:
  explicit PhraseBank(int topics = 0);

  int topics() const { return static_cast<int>(cells_.size()); }
  void add(int topic, Dimension dim, std::string phrase);
  /// Throws ConfigError when the cell does not exist or is empty.
  const std::vector<std::string>& cell(int topic, Dimension dim) const;
  std::optional<int> topic_of(const std::string& phrase) const;

  void save(const std::filesystem::path& path) const;
  static PhraseBank load(const std::filesystem::path& path);

 private:
  std::vector<std::array<std::vector<std::string>, kNumDimensions>> cells_;
  std::unordered_map<std::string, int> provenance_;
};

inline constexpr double kDefaultTopicProbability = 0.9;
inline constexpr std::size_t kMinPhrasesPerCell = 5;

/// Samples an anchor whose phrases come from the author's latent topic with
/// probability `p_topic`, otherwise uniformly from the other topics.
/// Deterministic in (profile.author_id, seed).
SemanticAnchor synth_anchor(const AuthorProfile& profile, const PhraseBank& bank, uint64_t seed,
                            double p_topic = kDefaultTopicProbability);

/// Builds a bank of pseudo-word phrases, `per_cell` phrases per cell.
PhraseBank generate_phrase_bank(int topics, uint64_t seed, std::size_t per_cell = 6);

void write_anchor_corpus(const std::filesystem::path& path, const std::vector<std::string>& lines);
std::vector<std::string> read_anchor_corpus(const std::filesystem::path& path);

}  // namespace sarm
