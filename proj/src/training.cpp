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

#include "sarm/training.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "sarm/errors.hpp"
#include "sarm/evaluation.hpp"
#include "sarm/user_interest.hpp"

namespace sarm {

std::size_t AuthorCatalog::at(uint64_t author_id) const {
  const auto it = position.find(author_id);
  if (it == position.end()) throw ConfigError("author " + std::to_string(author_id) + " has no anchor");
  return it->second;
}

DualTokenization constant_tokenization(std::size_t length) {
  if (length == 0) throw ConfigError("sequence length must be positive");
  DualTokenization d;
  d.base_seq.assign(length, kPadId);
  d.base_seq[0] = kClsId;
  d.ext_seq = {kClsId};
  d.align.assign(length, kPadId);
  d.align[0] = kClsId;
  return d;
}

AuthorCatalog build_catalog(const std::vector<uint64_t>& ids, const std::vector<std::string>& anchor_texts,
                            const BaseVocab& vocab, const MergeTable& merges, std::size_t seq_len, bool id_only) {
  if (ids.size() != anchor_texts.size()) throw ConfigError("catalog: one anchor per author required");
  AuthorCatalog c;
  c.ids = ids;
  c.index = AuthorIndex(ids);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!c.position.emplace(ids[i], i).second) throw ConfigError("catalog: duplicate author " + std::to_string(ids[i]));
    c.tokens.push_back(id_only ? constant_tokenization(seq_len) : tokenize_dual(anchor_texts[i], vocab, merges, seq_len));
  }
  return c;
}

AuthorCatalog build_catalog(const World& world, const BaseVocab& vocab, const MergeTable& merges,
                            std::size_t seq_len, bool id_only) {
  std::vector<std::string> texts;
  texts.reserve(world.anchors.size());
  for (const auto& a : world.anchors) texts.push_back(render_anchor(a));
  return build_catalog(world.author_ids(), texts, vocab, merges, seq_len, id_only);
}

void TrainConfig::validate() const {
  model.validate();
  if (!(adam.lr >= 0)) throw ConfigError("lr must be non-negative");
  if (!(adam.beta1 >= 0 && adam.beta1 < 1) || !(adam.beta2 >= 0 && adam.beta2 < 1))
    throw ConfigError("Adam betas must lie in [0, 1)");
  if (!(adam.eps > 0)) throw ConfigError("adam_eps must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (steps < -1) throw ConfigError("steps must be -1 (one pass) or non-negative");
  if (bank_write_every == 0) throw ConfigError("bank_write_every must be positive");
  if (refresh_every == 0) throw ConfigError("refresh_every must be positive");
}

std::size_t grad_group_of(const std::string& name) {
  if (name.starts_with("aux.")) return 4;
  if (name.starts_with("trunk.") || name.starts_with("tower.")) return 3;
  if (name.starts_with("user")) return 2;
  if (name == "e_id" || name.starts_with("cross.")) return 1;
  return 0;
}

std::pair<double, std::array<double, kGradGroups.size()>> gradient_norms(const ModelParams<float>& grads) {
  std::array<double, kGradGroups.size()> sq{};
  grads.visit([&](const std::string& name, const Mat<float>& g) {
    sq[grad_group_of(name)] += g.cast<double>().squaredNorm();
  });
  double total = 0;
  for (auto& s : sq) {
    total += s;
    s = std::sqrt(s);
  }
  return {std::sqrt(total), sq};
}

AssembledBatch assemble_batch(std::span<const InteractionEvent> events, const AuthorCatalog& catalog,
                              const ModelConfig& cfg, const MemoryBank& bank) {
  AssembledBatch b;
  std::unordered_map<uint64_t, std::size_t> slot_of;
  for (const auto& e : events) {
    auto [it, fresh] = slot_of.emplace(e.author_id, b.authors.size());
    if (fresh) {
      const auto pos = catalog.at(e.author_id);
      b.authors.push_back({&catalog.tokens[pos], catalog.index.slot(e.author_id)});
      b.author_ids.push_back(e.author_id);
    }
    if (e.h_rank.size() != static_cast<std::size_t>(cfg.rank_dim))
      throw ShapeError("event h_rank has " + std::to_string(e.h_rank.size()) + " features, model expects " +
                       std::to_string(cfg.rank_dim));
    BatchExample<float> ex;
    ex.author = it->second;
    auto hist = build_history(e.history, bank, cfg.history_len);
    ex.history = std::move(hist.rows);
    ex.history_valid = std::move(hist.valid);
    ex.rank_features = Eigen::Map<const RowVec<float>>(e.h_rank.data(), static_cast<Eigen::Index>(e.h_rank.size()));
    ex.labels = e.labels;
    b.examples.push_back(std::move(ex));
  }
  return b;
}

namespace {

void put_encoding(MemoryBank& bank, uint64_t id, const AuthorEncoding<float>& enc, uint64_t step) {
  bank.put(id, std::span<const float>(enc.h_cls.data(), static_cast<std::size_t>(enc.h_cls.size())),
           std::span<const float>(enc.h_tar.data(), static_cast<std::size_t>(enc.h_tar.size())), step);
}

}  // namespace

StepMetrics train_step(std::span<const InteractionEvent> batch, const TrainConfig& cfg, const AuthorCatalog& catalog,
                       ModelParams<float>& params, OptState<float>& opt, MemoryBank& bank, uint64_t step) {
  StepMetrics m;
  m.step = step;
  if (batch.empty()) return m;
  const auto assembled = assemble_batch(batch, catalog, cfg.model, bank);
  ModelParams<float> grads = params.zeros_like();
  const auto r = forward_backward<float>(params, cfg.model, assembled.authors, assembled.examples, &grads);
  m.l_rec = r.rec;
  m.l_aux = r.aux;
  m.loss = r.loss;
  m.authors = assembled.authors.size();
  std::tie(m.grad_norm, m.group_norms) = gradient_norms(grads);
  if (!std::isfinite(m.loss) || !std::isfinite(m.grad_norm)) {
    std::ostringstream diag;
    diag << "non-finite training state at step " << step << ": l_rec=" << m.l_rec << " l_aux=" << m.l_aux
         << " grad_norm=" << m.grad_norm;
    for (std::size_t g = 0; g < kGradGroups.size(); ++g) diag << " " << kGradGroups[g] << "=" << m.group_norms[g];
    diag << " first_event_ts=" << batch.front().timestamp << " authors=" << m.authors;
    throw NumericError(diag.str());
  }
  adam_update(params, grads, opt, cfg.adam);
  // The bank receives this step's forward values, computed before the update.
  if (step % cfg.bank_write_every == 0)
    for (std::size_t a = 0; a < assembled.author_ids.size(); ++a)
      put_encoding(bank, assembled.author_ids[a], r.authors[a], step);
  return m;
}

void refresh_bank(const ModelParams<float>& params, const ModelConfig& cfg, const AuthorCatalog& catalog,
                  MemoryBank& bank, uint64_t step) {
  for (std::size_t i = 0; i < catalog.ids.size(); ++i) {
    const auto enc = encode_dual_author(catalog.tokens[i], catalog.index.slot(catalog.ids[i]), params, cfg.fusion);
    put_encoding(bank, catalog.ids[i], enc, step);
  }
}

std::vector<TaskScores> score_events(std::span<const InteractionEvent> events, const ModelParams<float>& params,
                                     const ModelConfig& cfg, const MemoryBank& bank) {
  std::vector<TaskScores> out;
  out.reserve(events.size());
  for (const auto& e : events) {
    if (e.h_rank.size() != static_cast<std::size_t>(cfg.rank_dim))
      throw ShapeError("event h_rank has " + std::to_string(e.h_rank.size()) + " features, model expects " +
                       std::to_string(cfg.rank_dim));
    const auto rec = bank.get(e.author_id);
    const auto hist = build_history(e.history, bank, cfg.history_len);
    const auto d = static_cast<Eigen::Index>(rec.h_cls.size());
    const RowVec<float> h_cls = Eigen::Map<const RowVec<float>>(rec.h_cls.data(), d);
    const RowVec<float> h_tar = Eigen::Map<const RowVec<float>>(rec.h_tar.data(), d);
    const RowVec<float> h_rank =
        Eigen::Map<const RowVec<float>>(e.h_rank.data(), static_cast<Eigen::Index>(e.h_rank.size()));
    out.push_back(score_cached<float>(h_cls, h_tar, hist.rows, hist.valid, h_rank, params));
  }
  return out;
}

TrainResult run_training(const TrainConfig& cfg, const AuthorCatalog& catalog,
                         std::span<const InteractionEvent> train, std::span<const InteractionEvent> test,
                         const std::function<void(const StepMetrics&)>& on_step) {
  cfg.validate();
  TrainResult res{init_model<float>(cfg.model, cfg.seed), MemoryBank(cfg.model.d), {}};
  auto opt = init_opt_state(res.params);
  const std::size_t passes_steps = (train.size() + cfg.batch_size - 1) / cfg.batch_size;
  const auto steps = cfg.steps < 0 ? passes_steps : static_cast<std::size_t>(cfg.steps);
  if (!train.empty() || steps > 0) refresh_bank(res.params, cfg.model, catalog, res.bank, 0);
  const auto eval_set = cfg.eval_max_events > 0 && test.size() > cfg.eval_max_events
                            ? test.first(cfg.eval_max_events)
                            : test;

  std::size_t cursor = 0;
  for (std::size_t s = 0; s < steps && !train.empty(); ++s) {
    if (s > 0 && s % cfg.refresh_every == 0) refresh_bank(res.params, cfg.model, catalog, res.bank, s);
    if (cursor >= train.size()) cursor = 0;
    const auto n = std::min(cfg.batch_size, train.size() - cursor);
    auto m = train_step(train.subspan(cursor, n), cfg, catalog, res.params, opt, res.bank, s);
    cursor += n;
    const bool last = s + 1 == steps;
    if (last) refresh_bank(res.params, cfg.model, catalog, res.bank, s + 1);
    if (!eval_set.empty() && ((cfg.eval_every > 0 && (s + 1) % cfg.eval_every == 0) || last)) {
      const auto scores = score_events(eval_set, res.params, cfg.model, res.bank);
      m.has_test_auc = true;
      for (std::size_t t = 0; t < kNumTasks; ++t) {
        std::vector<int> labels;
        std::vector<double> sc;
        for (std::size_t i = 0; i < eval_set.size(); ++i) {
          labels.push_back(eval_set[i].labels[t]);
          sc.push_back(scores[i][t]);
        }
        const auto a = auc(labels, sc);
        m.test_auc_defined[t] = a.has_value();
        m.test_auc[t] = a.value_or(0.0);
      }
    }
    if (on_step) on_step(m);
    res.log.push_back(m);
  }
  return res;
}

std::string metrics_csv(const std::vector<StepMetrics>& log) {
  std::string out = "step,l_rec,l_aux,loss,grad_norm";
  for (const char* g : kGradGroups) out += std::string(",") + g + "_grad_norm";
  for (const char* t : kTaskNames) out += std::string(",test_auc_") + t;
  out += '\n';
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.9g", v);
    out += ',';
    out += buf;
  };
  for (const auto& m : log) {
    out += std::to_string(m.step);
    num(m.l_rec);
    num(m.l_aux);
    num(m.loss);
    num(m.grad_norm);
    for (double g : m.group_norms) num(g);
    for (std::size_t t = 0; t < kNumTasks; ++t) {
      if (m.has_test_auc && m.test_auc_defined[t]) {
        num(m.test_auc[t]);
      } else {
        out += ',';
      }
    }
    out += '\n';
  }
  return out;
}

}  // namespace sarm
