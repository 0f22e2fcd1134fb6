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

// Streaming trainer. Target authors are encoded live with gradients, history
// rows are read from the memory bank as constants, and the bank receives the
// batch's fresh author vectors after every step.

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "sarm/data_synth.hpp"
#include "sarm/memory_bank.hpp"
#include "sarm/sarm_model.hpp"
#include "sarm/tokenizer.hpp"

namespace sarm {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename Scalar>
struct OptState {
  ModelParams<Scalar> m, v;
  uint64_t t = 0;
};

template <typename Scalar>
OptState<Scalar> init_opt_state(const ModelParams<Scalar>& params) {
  return {params.zeros_like(), params.zeros_like(), 0};
}

/// Adam with bias correction. Throws ShapeError when the three parameter
/// sets disagree in layout.
template <typename Scalar>
void adam_update(ModelParams<Scalar>& params, const ModelParams<Scalar>& grads, OptState<Scalar>& opt,
                 const AdamConfig& cfg) {
  std::vector<Mat<Scalar>*> p, m, v;
  std::vector<const Mat<Scalar>*> g;
  params.visit([&](const std::string&, Mat<Scalar>& x) { p.push_back(&x); });
  opt.m.visit([&](const std::string&, Mat<Scalar>& x) { m.push_back(&x); });
  opt.v.visit([&](const std::string&, Mat<Scalar>& x) { v.push_back(&x); });
  grads.visit([&](const std::string&, const Mat<Scalar>& x) { g.push_back(&x); });
  if (g.size() != p.size() || m.size() != p.size() || v.size() != p.size())
    throw ShapeError("adam_update: parameter layouts differ");
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (g[i]->rows() != p[i]->rows() || g[i]->cols() != p[i]->cols() || m[i]->rows() != p[i]->rows() ||
        m[i]->cols() != p[i]->cols() || v[i]->rows() != p[i]->rows() || v[i]->cols() != p[i]->cols())
      throw ShapeError("adam_update: tensor " + std::to_string(i) + " shape mismatch");
  }
  opt.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(opt.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(opt.t));
  const Scalar b1 = Scalar(cfg.beta1), b2 = Scalar(cfg.beta2);
  const Scalar step = Scalar(cfg.lr / bc1);
  const Scalar inv_bc2 = Scalar(1.0 / bc2);
  const Scalar eps = Scalar(cfg.eps);
  for (std::size_t i = 0; i < p.size(); ++i) {
    auto pa = p[i]->array();
    auto ma = m[i]->array();
    auto va = v[i]->array();
    const auto ga = g[i]->array();
    ma = b1 * ma + (Scalar(1) - b1) * ga;
    va = b2 * va + (Scalar(1) - b2) * ga.square();
    pa -= step * ma / ((va * inv_bc2).sqrt() + eps);
  }
}

/// Tokenized anchors for every author of the world, plus the E_id index.
struct AuthorCatalog {
  std::vector<uint64_t> ids;
  std::vector<DualTokenization> tokens;  // parallel to ids
  AuthorIndex index;
  std::unordered_map<uint64_t, std::size_t> position;

  /// Throws ConfigError for an author outside the catalog.
  std::size_t at(uint64_t author_id) const;
};

/// [CLS] followed by padding: the anchor stand-in of the ID-only ablation.
DualTokenization constant_tokenization(std::size_t length);

AuthorCatalog build_catalog(const std::vector<uint64_t>& ids, const std::vector<std::string>& anchor_texts,
                            const BaseVocab& vocab, const MergeTable& merges, std::size_t seq_len, bool id_only);
AuthorCatalog build_catalog(const World& world, const BaseVocab& vocab, const MergeTable& merges,
                            std::size_t seq_len, bool id_only);

struct TrainConfig {
  ModelConfig model;
  AdamConfig adam;
  std::size_t batch_size = 64;
  long long steps = -1;  // -1: one chronological pass over the training events
  uint64_t seed = 42;    // parameter initialisation
  std::size_t bank_write_every = 1;
  std::size_t refresh_every = 1000;  // re-encode every author into the bank
  std::size_t eval_every = 0;        // periodic test AUC; 0 disables
  std::size_t eval_max_events = 0;   // cap on periodic evaluation; 0 = all
  bool id_only = false;

  void validate() const;
};

/// Parameter groups reported in step metrics.
inline constexpr std::array<const char*, 5> kGradGroups = {"sae", "tar", "user", "rank", "aux"};
std::size_t grad_group_of(const std::string& param_name);

struct StepMetrics {
  uint64_t step = 0;
  double l_rec = 0;
  double l_aux = 0;
  double loss = 0;
  double grad_norm = 0;
  std::array<double, kGradGroups.size()> group_norms{};
  std::size_t authors = 0;
  std::array<double, kNumTasks> test_auc{};
  bool has_test_auc = false;
  std::array<bool, kNumTasks> test_auc_defined{};
};

/// Global and per-group L2 norms of a gradient set.
std::pair<double, std::array<double, kGradGroups.size()>> gradient_norms(const ModelParams<float>& grads);

/// Batch of examples for forward_backward; distinct authors in order of
/// first appearance, history rows looked up in `bank`.
struct AssembledBatch {
  std::vector<BatchAuthor> authors;
  std::vector<uint64_t> author_ids;
  std::vector<BatchExample<float>> examples;
};
AssembledBatch assemble_batch(std::span<const InteractionEvent> events, const AuthorCatalog& catalog,
                              const ModelConfig& cfg, const MemoryBank& bank);

/// One optimisation step. Throws NumericError (with diagnostics) on a
/// non-finite loss or gradient.
StepMetrics train_step(std::span<const InteractionEvent> batch, const TrainConfig& cfg, const AuthorCatalog& catalog,
                       ModelParams<float>& params, OptState<float>& opt, MemoryBank& bank, uint64_t step);

/// Encodes every catalog author with the current parameters into the bank.
void refresh_bank(const ModelParams<float>& params, const ModelConfig& cfg, const AuthorCatalog& catalog,
                  MemoryBank& bank, uint64_t step);

/// Serving path: author vectors and history rows come from the bank only.
std::vector<TaskScores> score_events(std::span<const InteractionEvent> events, const ModelParams<float>& params,
                                     const ModelConfig& cfg, const MemoryBank& bank);

struct TrainResult {
  ModelParams<float> params;
  MemoryBank bank;
  std::vector<StepMetrics> log;
};

TrainResult run_training(const TrainConfig& cfg, const AuthorCatalog& catalog,
                         std::span<const InteractionEvent> train, std::span<const InteractionEvent> test,
                         const std::function<void(const StepMetrics&)>& on_step = {});

/// CSV: step,l_rec,l_aux,loss,grad_norm,<group>_grad_norm...,test_auc_<task>...
std::string metrics_csv(const std::vector<StepMetrics>& log);

}  // namespace sarm
