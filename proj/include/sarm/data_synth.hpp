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

// Deterministic synthetic world and impression stream. Click probability
// depends on the user's affinity for the author's latent topic, which is only
// observable through the author's anchor; this is what makes content-aware
// ranking measurably better than identity-only ranking.

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "sarm/anchor.hpp"
#include "sarm/ranking.hpp"

namespace sarm {

struct UserProfile {
  uint64_t user_id = 0;
  std::vector<double> topic_affinity;  // on the simplex
  double activity = 1.0;
};

struct InteractionEvent {
  uint64_t user_id = 0;
  uint64_t author_id = 0;
  std::vector<uint64_t> history;  // past long-view authors, most recent last
  std::vector<float> h_rank;
  TaskLabels labels{};
  uint64_t timestamp = 0;

  bool operator==(const InteractionEvent&) const = default;
};

struct WorldConfig {
  uint64_t seed = 1;
  int n_users = 2000;
  int n_authors = 500;
  int topics = 8;
  double p_topic = kDefaultTopicProbability;
  double zipf_s = 1.1;
  double dirichlet_alpha = 0.3;
  double activity_sigma = 0.5;
  // A fraction of authors start streaming late, uniformly in
  // [late_debut_start, 1); they populate the low-exposure strata.
  double late_debut_fraction = 0.2;
  double late_debut_start = 0.6;
  std::size_t phrases_per_cell = 6;
};

struct World {
  WorldConfig cfg;
  std::vector<UserProfile> users;
  std::vector<AuthorProfile> authors;
  std::vector<SemanticAnchor> anchors;  // parallel to authors
  PhraseBank phrase_bank;

  std::vector<uint64_t> author_ids() const;
  const AuthorProfile* find_author(uint64_t id) const;
  std::size_t author_position(uint64_t id) const;  // throws ConfigError when absent
};

World gen_world(const WorldConfig& cfg);
World gen_world(uint64_t seed, int n_users, int n_authors, int topics);

/// Label model:
///   p_click = sigmoid(w1 * affinity[user][topic] + w2 * identity_bias + w3 * noise + bias)
///   lvtr|click = sigmoid(6 * affinity - 1 + 0.5 * identity_bias)
///   wtr|click  = sigmoid(5 * affinity - 3 + 0.5 * identity_bias)
///   gtr|click  = sigmoid(4 * affinity - 4 + identity_bias)
/// where noise is a unit-variance combination of the first (up to four)
/// noise features in h_rank. h_rank = [log(popularity / mean popularity) / 4,
/// log(activity), rank_dim - 2 standard normal features].
struct StreamConfig {
  uint64_t seed = 7;
  std::size_t n_events = 200000;
  double w1 = 8.0;
  double w2 = 1.0;
  double w3 = 0.5;
  double bias = -2.5;
  int rank_dim = 16;
  int history_len = 20;
};

std::vector<InteractionEvent> gen_stream(const World& world, const StreamConfig& cfg);

/// Chronological split; the last `test_fraction` of events (by timestamp)
/// form the test set.
std::pair<std::vector<InteractionEvent>, std::vector<InteractionEvent>> split_train_test(
    const std::vector<InteractionEvent>& stream, double test_fraction = 0.1);

/// Click probability of an event under the generative model (Bayes oracle).
double click_probability(const World& world, const StreamConfig& cfg, const InteractionEvent& event);

void save_world(const World& world, const std::filesystem::path& dir);
World load_world(const std::filesystem::path& dir);

/// Tab-separated: user_id, author_id, history, h_rank, ctr, wtr, lvtr, gtr, ts.
void write_events(const std::filesystem::path& path, const std::vector<InteractionEvent>& events);
std::vector<InteractionEvent> read_events(const std::filesystem::path& path);

}  // namespace sarm
