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

#include "sarm/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "sarm/errors.hpp"
#include "sarm/text.hpp"

namespace sarm {
namespace {

template <typename T>
T parse_value(const std::string& key, std::string_view v) {
  v = text::trim(v);
  T out{};
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size() || v.empty())
    throw ConfigError("invalid value '" + std::string(v) + "' for key " + key);
  return out;
}

bool parse_bool(const std::string& key, std::string_view v) {
  v = text::trim(v);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("invalid boolean '" + std::string(v) + "' for key " + key);
}

template <typename T>
std::vector<T> parse_list(const std::string& key, std::string_view v) {
  std::vector<T> out;
  if (text::trim(v).empty()) return out;
  for (const auto& f : text::split(v, ",")) out.push_back(parse_value<T>(key, f));
  return out;
}

template <typename T>
std::string show(T v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <typename T>
std::string show_list(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + show(v[i]);
  return out;
}

struct Key {
  const char* name;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

template <typename T, typename Access>
Key num_key(const char* name, Access access) {
  return {name, [access](const RunConfig& c) { return show(access(const_cast<RunConfig&>(c))); },
          [access, name](RunConfig& c, const std::string& v) { access(c) = parse_value<T>(name, v); }};
}

template <typename Access>
Key bool_key(const char* name, Access access) {
  return {name, [access](const RunConfig& c) { return std::string(access(const_cast<RunConfig&>(c)) ? "true" : "false"); },
          [access, name](RunConfig& c, const std::string& v) { access(c) = parse_bool(name, v); }};
}

template <typename T, typename Access>
Key list_key(const char* name, Access access) {
  return {name, [access](const RunConfig& c) { return show_list(access(const_cast<RunConfig&>(c))); },
          [access, name](RunConfig& c, const std::string& v) { access(c) = parse_list<T>(name, v); }};
}

#define SARM_FIELD(expr) [](RunConfig& c) -> auto& { return expr; }

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      {"out_dir", [](const RunConfig& c) { return c.out_dir.string(); },
       [](RunConfig& c, const std::string& v) { c.out_dir = std::string(text::trim(v)); }},
      num_key<uint64_t>("world_seed", SARM_FIELD(c.world.seed)),
      num_key<int>("n_users", SARM_FIELD(c.world.n_users)),
      num_key<int>("n_authors", SARM_FIELD(c.world.n_authors)),
      num_key<int>("topics", SARM_FIELD(c.world.topics)),
      num_key<double>("p_topic", SARM_FIELD(c.world.p_topic)),
      num_key<double>("zipf_s", SARM_FIELD(c.world.zipf_s)),
      num_key<double>("dirichlet_alpha", SARM_FIELD(c.world.dirichlet_alpha)),
      num_key<double>("activity_sigma", SARM_FIELD(c.world.activity_sigma)),
      num_key<double>("late_debut_fraction", SARM_FIELD(c.world.late_debut_fraction)),
      num_key<double>("late_debut_start", SARM_FIELD(c.world.late_debut_start)),
      num_key<std::size_t>("phrases_per_cell", SARM_FIELD(c.world.phrases_per_cell)),
      num_key<uint64_t>("stream_seed", SARM_FIELD(c.stream.seed)),
      num_key<std::size_t>("n_events", SARM_FIELD(c.stream.n_events)),
      num_key<double>("w_affinity", SARM_FIELD(c.stream.w1)),
      num_key<double>("w_identity", SARM_FIELD(c.stream.w2)),
      num_key<double>("w_noise", SARM_FIELD(c.stream.w3)),
      num_key<double>("click_bias", SARM_FIELD(c.stream.bias)),
      num_key<double>("test_fraction", SARM_FIELD(c.test_fraction)),
      num_key<std::size_t>("vocab_size", SARM_FIELD(c.vocab_size)),
      num_key<uint64_t>("bpe_threshold", SARM_FIELD(c.bpe_threshold)),
      num_key<std::size_t>("max_merges", SARM_FIELD(c.max_merges)),
      num_key<int>("d", SARM_FIELD(c.train.model.d)),
      num_key<int>("seq_len", SARM_FIELD(c.train.model.seq_len)),
      num_key<int>("blocks", SARM_FIELD(c.train.model.blocks)),
      num_key<int>("ffn_mult", SARM_FIELD(c.train.model.ffn_mult)),
      list_key<int>("fusion_sites", SARM_FIELD(c.train.model.fusion.sites)),
      bool_key("fusion_enabled", SARM_FIELD(c.train.model.fusion.enabled)),
      num_key<int>("history_len", SARM_FIELD(c.train.model.history_len)),
      num_key<int>("user_blocks", SARM_FIELD(c.train.model.user_blocks)),
      num_key<int>("rank_dim", SARM_FIELD(c.train.model.rank_dim)),
      num_key<double>("lambda", SARM_FIELD(c.train.model.lambda)),
      num_key<double>("lr", SARM_FIELD(c.train.adam.lr)),
      num_key<double>("beta1", SARM_FIELD(c.train.adam.beta1)),
      num_key<double>("beta2", SARM_FIELD(c.train.adam.beta2)),
      num_key<double>("adam_eps", SARM_FIELD(c.train.adam.eps)),
      num_key<std::size_t>("batch_size", SARM_FIELD(c.train.batch_size)),
      num_key<long long>("steps", SARM_FIELD(c.train.steps)),
      num_key<uint64_t>("train_seed", SARM_FIELD(c.train.seed)),
      num_key<std::size_t>("bank_write_every", SARM_FIELD(c.train.bank_write_every)),
      num_key<std::size_t>("refresh_every", SARM_FIELD(c.train.refresh_every)),
      num_key<std::size_t>("eval_every", SARM_FIELD(c.train.eval_every)),
      num_key<std::size_t>("eval_max_events", SARM_FIELD(c.train.eval_max_events)),
      bool_key("id_only", SARM_FIELD(c.train.id_only)),
      list_key<uint64_t>("bucket_edges", SARM_FIELD(c.bucket_edges)),
  };
  return table;
}

#undef SARM_FIELD

}  // namespace

void RunConfig::validate() const {
  if (out_dir.empty()) throw ConfigError("out_dir must not be empty");
  if (world.topics < 2) throw ConfigError("topics must be >= 2");
  if (world.n_users < 1 || world.n_authors < 1) throw ConfigError("n_users and n_authors must be positive");
  if (!(world.p_topic >= 0 && world.p_topic <= 1)) throw ConfigError("p_topic must lie in [0, 1]");
  if (!(world.zipf_s > 0)) throw ConfigError("zipf_s must be positive");
  if (!(world.dirichlet_alpha > 0)) throw ConfigError("dirichlet_alpha must be positive");
  if (!(world.late_debut_fraction >= 0 && world.late_debut_fraction <= 1))
    throw ConfigError("late_debut_fraction must lie in [0, 1]");
  if (!(world.late_debut_start >= 0 && world.late_debut_start < 1))
    throw ConfigError("late_debut_start must lie in [0, 1)");
  if (world.phrases_per_cell < 5) throw ConfigError("phrases_per_cell must be >= 5");
  if (!(test_fraction >= 0 && test_fraction <= 1)) throw ConfigError("test_fraction must lie in [0, 1]");
  if (vocab_size < 8) throw ConfigError("vocab_size must be >= 8");
  if (bpe_threshold < 1) throw ConfigError("bpe_threshold must be >= 1");
  if (stream.rank_dim != train.model.rank_dim || stream.history_len != train.model.history_len)
    throw ConfigError("stream and model disagree on rank_dim or history_len");
  // Vocabulary sizes are only known once the tokenizer exists.
  ModelConfig m = train.model;
  m.base_vocab = std::max<std::size_t>(m.base_vocab, 4);
  m.ext_vocab = std::max(m.ext_vocab, m.base_vocab);
  TrainConfig t = train;
  t.model = m;
  t.validate();
  if (bucket_edges.empty() || bucket_edges.front() != 0) throw ConfigError("bucket_edges must start at 0");
  for (std::size_t i = 1; i < bucket_edges.size(); ++i)
    if (bucket_edges[i] <= bucket_edges[i - 1]) throw ConfigError("bucket_edges must increase strictly");
}

std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& k : keys()) out.emplace_back(k.name, k.get(cfg));
  return out;
}

std::string render_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : config_entries(cfg)) out += k + "=" + v + "\n";
  return out;
}

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& k : keys()) {
    if (key == k.name) {
      k.set(cfg, value);
      // The stream and the model share these two values.
      if (key == "rank_dim") cfg.stream.rank_dim = cfg.train.model.rank_dim;
      if (key == "history_len") cfg.stream.history_len = cfg.train.model.history_len;
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void apply_assignment(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + assignment + "'");
  apply_setting(cfg, std::string(text::trim(std::string_view(assignment).substr(0, eq))), assignment.substr(eq + 1));
}

RunConfig parse_config_text(const std::string& text, RunConfig base) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    if (text::trim(line).empty()) continue;
    apply_assignment(base, line);
  }
  return base;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingFileError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

}  // namespace sarm
