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

// The operational commands behind the CLI. Each validates its config,
// echoes it to `log`, reads artifacts from and writes artifacts to out_dir.

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <utility>
#include <vector>

#include "sarm/config.hpp"
#include "sarm/evaluation.hpp"

namespace sarm {

void cmd_gen_data(const RunConfig& cfg, std::ostream& log);
void cmd_build_tokenizer(const RunConfig& cfg, std::ostream& log);
void cmd_train(const RunConfig& cfg, std::ostream& log);
EvalReport cmd_eval(const RunConfig& cfg, std::ostream& log);

/// Lookup-only scoring: author vectors and history rows come from the bank.
/// `events` defaults to the test split; `out` to out_dir/scores.csv.
void cmd_score(const RunConfig& cfg, const std::filesystem::path& events, const std::filesystem::path& out,
               std::ostream& log);

/// token<TAB>weight lines; `out` defaults to out_dir/attribution_<id>.tsv.
void cmd_inspect_attention(const RunConfig& cfg, uint64_t author_id, const std::filesystem::path& out,
                           std::ostream& log);

/// rank<TAB>author_id<TAB>similarity lines; `out` defaults to
/// out_dir/neighbors_<id>.tsv.
std::vector<Neighbor> cmd_retrieve(const RunConfig& cfg, uint64_t author_id, std::size_t k,
                                   const std::filesystem::path& out, std::ostream& log);

/// Shared artifact loading.
struct Tokenizer {
  BaseVocab vocab;
  MergeTable merges;
};
Tokenizer load_tokenizer(const RunConfig& cfg);
ModelConfig bound_model_config(const RunConfig& cfg, const Tokenizer& tok, std::size_t n_authors);
std::pair<std::vector<InteractionEvent>, std::vector<InteractionEvent>> load_split(const RunConfig& cfg);

}  // namespace sarm
