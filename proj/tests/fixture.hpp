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

// A small end-to-end setup (world, stream, tokenizer, catalog, trainer
// config) shared by the training, evaluation and acceptance tests.

#include <string>
#include <vector>

#include "sarm/data_synth.hpp"
#include "sarm/tokenizer.hpp"
#include "sarm/training.hpp"

namespace sarm::fixture {

struct Setup {
  World world;
  StreamConfig stream;
  std::vector<InteractionEvent> train, test;
  BaseVocab vocab;
  MergeTable merges;
  TrainConfig cfg;
  AuthorCatalog catalog;
};

inline Setup tiny(uint64_t seed = 5, std::size_t n_events = 2000, bool id_only = false) {
  Setup s;
  s.world = gen_world(seed, 80, 24, 4);
  s.stream.seed = seed + 1;
  s.stream.n_events = n_events;
  s.stream.rank_dim = 4;
  s.stream.history_len = 4;
  std::tie(s.train, s.test) = split_train_test(gen_stream(s.world, s.stream));

  std::vector<std::string> corpus;
  for (const auto& a : s.world.anchors) corpus.push_back(render_anchor(a));
  s.vocab = BaseVocab::build(corpus, 128);
  std::vector<std::vector<TokenId>> tokenized;
  for (const auto& line : corpus) tokenized.push_back(tokenize_words(line, s.vocab));
  s.merges = train_bpe_merges(tokenized, s.vocab, 3, 64);

  auto& m = s.cfg.model;
  m.d = 8;
  m.seq_len = 24;
  m.blocks = 2;
  m.fusion.sites = {0, 1};
  m.history_len = 4;
  m.rank_dim = 4;
  m.base_vocab = s.vocab.size();
  m.ext_vocab = s.merges.ext_size();
  m.authors = s.world.authors.size();
  s.cfg.batch_size = 32;
  s.cfg.seed = seed + 2;
  s.cfg.id_only = id_only;
  s.catalog = build_catalog(s.world, s.vocab, s.merges, static_cast<std::size_t>(m.seq_len), id_only);
  return s;
}

}  // namespace sarm::fixture
