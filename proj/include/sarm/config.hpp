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

// Flat key=value run configuration shared by every CLI command.

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "sarm/data_synth.hpp"
#include "sarm/training.hpp"

namespace sarm {

struct RunConfig {
  std::filesystem::path out_dir = "sarm_out";

  WorldConfig world;
  StreamConfig stream;
  double test_fraction = 0.1;

  std::size_t vocab_size = 128;
  uint64_t bpe_threshold = 3;
  std::size_t max_merges = 256;

  TrainConfig train;  // includes the model shape
  std::vector<uint64_t> bucket_edges = {0, 6, 10, 100, 1000};

  /// Artifact locations inside out_dir.
  std::filesystem::path world_dir() const { return out_dir / "world"; }
  std::filesystem::path events_path() const { return out_dir / "events.tsv"; }
  std::filesystem::path vocab_path() const { return out_dir / "vocab.tsv"; }
  std::filesystem::path merges_path() const { return out_dir / "merges.tsv"; }
  std::filesystem::path params_path() const { return out_dir / "params.bin"; }
  std::filesystem::path bank_path() const { return out_dir / "bank.bin"; }
  std::filesystem::path metrics_path() const { return out_dir / "metrics.csv"; }

  /// Throws ConfigError on any inconsistent value.
  void validate() const;
};

/// Every key with its current value, in a fixed order.
std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& cfg);
std::string render_config(const RunConfig& cfg);

/// Applies one `key=value` assignment; unknown keys and malformed values
/// raise ConfigError naming the key.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);
void apply_assignment(RunConfig& cfg, const std::string& assignment);

/// Reads a config file ('#' comments, blank lines ignored).
RunConfig parse_config_text(const std::string& text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path);

}  // namespace sarm
