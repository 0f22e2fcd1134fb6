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

// Command-line entry point: one binary, one subcommand per pipeline stage.

#include <cstdint>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sarm/commands.hpp"
#include "sarm/config.hpp"
#include "sarm/errors.hpp"

namespace {

int exit_code_for(const std::string& kind) {
  if (kind == "config_error") return 2;
  if (kind == "missing_file") return 3;
  if (kind == "format_error") return 4;
  if (kind == "parse_error") return 5;
  if (kind == "numeric_error") return 6;
  if (kind == "shape_error") return 7;
  return 1;
}

int report_error(const std::string& kind, const std::string& message) {
  const nlohmann::json line = {{"error", kind}, {"message", message}};
  std::cerr << line.dump() << "\n";
  return exit_code_for(kind);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic-anchor author encoder: data, tokenizer, training, evaluation and serving tools"};
  app.require_subcommand(1);
  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "flat key=value config file");
  app.add_option("--set", overrides, "override a config key (key=value), repeatable");

  auto* gen = app.add_subcommand("gen-data", "generate the synthetic world and impression stream");
  auto* tok = app.add_subcommand("build-tokenizer", "build the base vocabulary and BPE merges");
  auto* train = app.add_subcommand("train", "train the model and fill the memory bank");
  auto* eval = app.add_subcommand("eval", "exposure-stratified AUC/GAUC report on the test split");

  std::string events, out;
  auto* score = app.add_subcommand("score", "score events from the memory bank only");
  score->add_option("--events", events, "event file (default: test split)");
  score->add_option("--out", out, "output CSV");

  uint64_t author = 0;
  std::size_t k = 5;
  auto* attn = app.add_subcommand("inspect-attention", "per-token attribution for one author");
  attn->add_option("--author", author, "author id")->required();
  attn->add_option("--out", out, "output TSV");

  auto* retrieve = app.add_subcommand("retrieve", "nearest authors by [CLS] cosine");
  retrieve->add_option("--author", author, "author id")->required();
  retrieve->add_option("-k,--k", k, "neighbour count");
  retrieve->add_option("--out", out, "output TSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return report_error("usage_error", e.what());
  }

  try {
    sarm::RunConfig cfg = config_path.empty() ? sarm::RunConfig{} : sarm::load_config(config_path);
    for (const auto& o : overrides) sarm::apply_assignment(cfg, o);
    auto& log = std::cout;
    if (*gen) sarm::cmd_gen_data(cfg, log);
    if (*tok) sarm::cmd_build_tokenizer(cfg, log);
    if (*train) sarm::cmd_train(cfg, log);
    if (*eval) sarm::cmd_eval(cfg, log);
    if (*score) sarm::cmd_score(cfg, events, out, log);
    if (*attn) sarm::cmd_inspect_attention(cfg, author, out, log);
    if (*retrieve) sarm::cmd_retrieve(cfg, author, k, out, log);
  } catch (const sarm::Error& e) {
    return report_error(e.kind(), e.what());
  } catch (const std::exception& e) {
    return report_error("internal_error", e.what());
  }
  return 0;
}
