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

#include "sarm/commands.hpp"

#include <cstdio>
#include <fstream>

#include "sarm/errors.hpp"
#include "sarm/training.hpp"

namespace sarm {
namespace {

void echo_config(const RunConfig& cfg, const char* command, std::ostream& log) {
  cfg.validate();
  log << "# " << command << " effective config\n" << render_config(cfg) << std::flush;
}

void require(const std::filesystem::path& p) {
  if (!std::filesystem::exists(p)) throw MissingFileError("missing artifact " + p.string());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MissingFileError("cannot write " + path.string());
  out << text;
}

std::vector<std::string> anchor_texts(const World& world) {
  std::vector<std::string> texts;
  for (const auto& a : world.anchors) texts.push_back(render_anchor(a));
  return texts;
}

World load_world_checked(const RunConfig& cfg) {
  require(cfg.world_dir() / "authors.tsv");
  return load_world(cfg.world_dir());
}

struct Trained {
  ModelConfig model;
  ModelParams<float> params;
  MemoryBank bank;
};

Trained load_trained(const RunConfig& cfg, const Tokenizer& tok, std::size_t n_authors) {
  require(cfg.params_path());
  require(cfg.bank_path());
  Trained t{bound_model_config(cfg, tok, n_authors), {}, MemoryBank::load(cfg.bank_path())};
  t.params = load_params(t.model, cfg.params_path());
  if (t.bank.dim() != t.model.d)
    throw FormatError("bank dimension " + std::to_string(t.bank.dim()) + " differs from model d " +
                      std::to_string(t.model.d));
  return t;
}

}  // namespace

Tokenizer load_tokenizer(const RunConfig& cfg) {
  require(cfg.vocab_path());
  require(cfg.merges_path());
  Tokenizer t{BaseVocab::load(cfg.vocab_path()), {}};
  t.merges = MergeTable::load(cfg.merges_path(), t.vocab);
  return t;
}

ModelConfig bound_model_config(const RunConfig& cfg, const Tokenizer& tok, std::size_t n_authors) {
  ModelConfig m = cfg.train.model;
  m.base_vocab = tok.vocab.size();
  m.ext_vocab = tok.merges.ext_size();
  m.authors = n_authors;
  m.validate();
  return m;
}

std::pair<std::vector<InteractionEvent>, std::vector<InteractionEvent>> load_split(const RunConfig& cfg) {
  require(cfg.events_path());
  return split_train_test(read_events(cfg.events_path()), cfg.test_fraction);
}

void cmd_gen_data(const RunConfig& cfg, std::ostream& log) {
  echo_config(cfg, "gen-data", log);
  const World world = gen_world(cfg.world);
  const auto stream = gen_stream(world, cfg.stream);
  save_world(world, cfg.world_dir());
  write_events(cfg.events_path(), stream);
  log << "wrote " << world.users.size() << " users, " << world.authors.size() << " authors, " << stream.size()
      << " events to " << cfg.out_dir.string() << "\n";
}

void cmd_build_tokenizer(const RunConfig& cfg, std::ostream& log) {
  echo_config(cfg, "build-tokenizer", log);
  const World world = load_world_checked(cfg);
  const auto corpus = anchor_texts(world);
  const BaseVocab vocab = BaseVocab::build(corpus, cfg.vocab_size);
  std::vector<std::vector<TokenId>> tokenized;
  tokenized.reserve(corpus.size());
  for (const auto& line : corpus) tokenized.push_back(tokenize_words(line, vocab));
  const MergeTable merges = train_bpe_merges(tokenized, vocab, cfg.bpe_threshold, cfg.max_merges);
  vocab.save(cfg.vocab_path());
  merges.save(cfg.merges_path());
  log << "base vocab " << vocab.size() << " tokens, " << merges.merges().size() << " merges\n";
}

void cmd_train(const RunConfig& cfg, std::ostream& log) {
  echo_config(cfg, "train", log);
  const World world = load_world_checked(cfg);
  const Tokenizer tok = load_tokenizer(cfg);
  const auto [train, test] = load_split(cfg);
  TrainConfig tc = cfg.train;
  tc.model = bound_model_config(cfg, tok, world.authors.size());
  const AuthorCatalog catalog = build_catalog(world, tok.vocab, tok.merges,
                                              static_cast<std::size_t>(tc.model.seq_len), tc.id_only);
  const auto result = run_training(tc, catalog, train, test, [&](const StepMetrics& m) {
    if (!m.has_test_auc) return;
    char buf[160];
    std::snprintf(buf, sizeof buf, "step %llu l_rec %.5f l_aux %.5f test_auc_ctr %.4f\n",
                  static_cast<unsigned long long>(m.step), m.l_rec, m.l_aux, m.test_auc[0]);
    log << buf << std::flush;
  });
  save_params(result.params, cfg.params_path());
  result.bank.save(cfg.bank_path());
  write_text(cfg.metrics_path(), metrics_csv(result.log));
  log << "trained " << result.log.size() << " steps; wrote " << cfg.params_path().string() << ", "
      << cfg.bank_path().string() << ", " << cfg.metrics_path().string() << "\n";
}

EvalReport cmd_eval(const RunConfig& cfg, std::ostream& log) {
  echo_config(cfg, "eval", log);
  const World world = load_world_checked(cfg);
  const Tokenizer tok = load_tokenizer(cfg);
  const auto t = load_trained(cfg, tok, world.authors.size());
  const auto [train, test] = load_split(cfg);
  const auto scores = score_events(test, t.params, t.model, t.bank);
  const auto report = stratified_eval(test, scores, exposure_counts(train), cfg.bucket_edges);
  write_text(cfg.out_dir / "report.csv", report.csv());
  write_text(cfg.out_dir / "report.txt", report.table());
  log << report.table();
  return report;
}

void cmd_score(const RunConfig& cfg, const std::filesystem::path& events, const std::filesystem::path& out,
               std::ostream& log) {
  echo_config(cfg, "score", log);
  const World world = load_world_checked(cfg);
  const Tokenizer tok = load_tokenizer(cfg);
  const auto t = load_trained(cfg, tok, world.authors.size());
  std::vector<InteractionEvent> input;
  if (events.empty()) {
    input = load_split(cfg).second;
  } else {
    require(events);
    input = read_events(events);
  }
  const auto scores = score_events(input, t.params, t.model, t.bank);
  std::string csv = "user_id,author_id,timestamp";
  for (const char* name : kTaskNames) csv += std::string(",") + name;
  csv += '\n';
  char buf[48];
  for (std::size_t i = 0; i < input.size(); ++i) {
    csv += std::to_string(input[i].user_id) + "," + std::to_string(input[i].author_id) + "," +
           std::to_string(input[i].timestamp);
    for (double s : scores[i]) {
      std::snprintf(buf, sizeof buf, ",%.9g", s);
      csv += buf;
    }
    csv += '\n';
  }
  const auto path = out.empty() ? cfg.out_dir / "scores.csv" : out;
  write_text(path, csv);
  log << "scored " << input.size() << " events into " << path.string() << "\n";
}

void cmd_inspect_attention(const RunConfig& cfg, uint64_t author_id, const std::filesystem::path& out,
                           std::ostream& log) {
  echo_config(cfg, "inspect-attention", log);
  const World world = load_world_checked(cfg);
  const Tokenizer tok = load_tokenizer(cfg);
  const auto t = load_trained(cfg, tok, world.authors.size());
  const auto pos = world.author_position(author_id);
  const AuthorIndex index(world.author_ids());
  const DualTokenization dual =
      cfg.train.id_only ? constant_tokenization(static_cast<std::size_t>(t.model.seq_len))
                        : tokenize_dual(render_anchor(world.anchors[pos]), tok.vocab, tok.merges,
                                        static_cast<std::size_t>(t.model.seq_len));
  const auto attribution = attention_attribution(dual, index.slot(author_id), t.params, t.model.fusion);
  const auto path = out.empty() ? cfg.out_dir / ("attribution_" + std::to_string(author_id) + ".tsv") : out;
  write_text(path, attribution.to_tsv(tok.vocab));
  log << "wrote " << attribution.weights.size() << " token weights to " << path.string() << "\n";
}

std::vector<Neighbor> cmd_retrieve(const RunConfig& cfg, uint64_t author_id, std::size_t k,
                                   const std::filesystem::path& out, std::ostream& log) {
  echo_config(cfg, "retrieve", log);
  require(cfg.bank_path());
  const MemoryBank bank = MemoryBank::load(cfg.bank_path());
  const auto neighbors = a2a_retrieve(author_id, bank, k);
  std::string tsv;
  char buf[96];
  for (std::size_t i = 0; i < neighbors.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu\t%llu\t%.9g\n", i + 1, static_cast<unsigned long long>(neighbors[i].author_id),
                  neighbors[i].similarity);
    tsv += buf;
  }
  const auto path = out.empty() ? cfg.out_dir / ("neighbors_" + std::to_string(author_id) + ".tsv") : out;
  write_text(path, tsv);
  log << tsv;
  return neighbors;
}

}  // namespace sarm
