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

#include "sarm/data_synth.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <deque>
#include <fstream>
#include <numeric>
#include <unordered_map>

#include "sarm/errors.hpp"
#include "sarm/numerics.hpp"
#include "sarm/rng.hpp"
#include "sarm/text.hpp"

namespace sarm {
namespace {

template <typename T>
std::string fmt_num(T v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <typename T>
T parse_num(std::string_view s, const std::string& where) {
  T v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw FormatError(where + ": cannot parse number '" + std::string(s) + "'");
  return v;
}

template <typename T>
std::vector<T> parse_list(std::string_view s, const std::string& where) {
  std::vector<T> out;
  if (s.empty()) return out;
  for (const auto& f : text::split(s, ",")) out.push_back(parse_num<T>(f, where));
  return out;
}

template <typename T>
std::string join_list(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += fmt_num(v[i]);
  }
  return out;
}

double noise_term(const std::vector<float>& h_rank) {
  const std::size_t k = h_rank.size() > 2 ? std::min<std::size_t>(4, h_rank.size() - 2) : 0;
  if (k == 0) return 0.0;
  double s = 0;
  for (std::size_t i = 0; i < k; ++i) s += h_rank[2 + i];
  return s / std::sqrt(static_cast<double>(k));
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFileError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MissingFileError("cannot write " + path.string());
  return out;
}

}  // namespace

std::vector<uint64_t> World::author_ids() const {
  std::vector<uint64_t> ids;
  ids.reserve(authors.size());
  for (const auto& a : authors) ids.push_back(a.author_id);
  return ids;
}

const AuthorProfile* World::find_author(uint64_t id) const {
  for (const auto& a : authors)
    if (a.author_id == id) return &a;
  return nullptr;
}

std::size_t World::author_position(uint64_t id) const {
  // Generated ids are 1..n in order; fall back to a scan for loaded worlds.
  if (id >= 1 && id <= authors.size() && authors[id - 1].author_id == id) return id - 1;
  for (std::size_t i = 0; i < authors.size(); ++i)
    if (authors[i].author_id == id) return i;
  throw ConfigError("unknown author id " + std::to_string(id));
}

World gen_world(const WorldConfig& cfg) {
  if (cfg.topics < 2) throw ConfigError("topics must be >= 2");
  if (cfg.n_users < 1 || cfg.n_authors < 1) throw ConfigError("world needs at least one user and one author");
  World w;
  w.cfg = cfg;
  w.phrase_bank = generate_phrase_bank(cfg.topics, cfg.seed, cfg.phrases_per_cell);

  Rng rng(mix_seed(cfg.seed, 1));
  // Zipf popularity over a random permutation of ranks.
  std::vector<int> ranks(static_cast<std::size_t>(cfg.n_authors));
  std::iota(ranks.begin(), ranks.end(), 1);
  for (std::size_t i = ranks.size(); i > 1; --i) std::swap(ranks[i - 1], ranks[rng.index(i)]);
  for (int a = 0; a < cfg.n_authors; ++a) {
    AuthorProfile p;
    p.author_id = static_cast<uint64_t>(a + 1);
    p.latent_topic = static_cast<int>(rng.index(static_cast<uint64_t>(cfg.topics)));
    p.popularity = std::pow(static_cast<double>(ranks[static_cast<std::size_t>(a)]), -cfg.zipf_s);
    p.identity_bias = rng.normal();
    p.debut = rng.bernoulli(cfg.late_debut_fraction) ? rng.uniform(cfg.late_debut_start, 1.0) : 0.0;
    w.authors.push_back(p);
  }
  for (const auto& p : w.authors) w.anchors.push_back(canonicalize(synth_anchor(p, w.phrase_bank, cfg.seed, cfg.p_topic)));

  Rng urng(mix_seed(cfg.seed, 2));
  for (int u = 0; u < cfg.n_users; ++u) {
    UserProfile up;
    up.user_id = static_cast<uint64_t>(u + 1);
    double total = 0;
    up.topic_affinity.resize(static_cast<std::size_t>(cfg.topics));
    for (auto& a : up.topic_affinity) total += (a = urng.gamma(cfg.dirichlet_alpha));
    if (total <= 0) {
      up.topic_affinity.assign(up.topic_affinity.size(), 1.0 / cfg.topics);
    } else {
      for (auto& a : up.topic_affinity) a /= total;
    }
    up.activity = std::exp(urng.normal(0.0, cfg.activity_sigma));
    w.users.push_back(std::move(up));
  }
  return w;
}

World gen_world(uint64_t seed, int n_users, int n_authors, int topics) {
  WorldConfig cfg;
  cfg.seed = seed;
  cfg.n_users = n_users;
  cfg.n_authors = n_authors;
  cfg.topics = topics;
  return gen_world(cfg);
}

double click_probability(const World& world, const StreamConfig& cfg, const InteractionEvent& e) {
  const auto& author = world.authors[world.author_position(e.author_id)];
  const auto& user = world.users.at(e.user_id - 1);
  const double aff = user.topic_affinity[static_cast<std::size_t>(author.latent_topic)];
  return sigmoid(cfg.w1 * aff + cfg.w2 * author.identity_bias + cfg.w3 * noise_term(e.h_rank) + cfg.bias);
}

std::vector<InteractionEvent> gen_stream(const World& world, const StreamConfig& cfg) {
  if (world.authors.empty() || world.users.empty()) throw ConfigError("world is empty");
  Rng rng(mix_seed(cfg.seed, 3));

  std::vector<std::size_t> by_debut(world.authors.size());
  std::iota(by_debut.begin(), by_debut.end(), 0);
  std::stable_sort(by_debut.begin(), by_debut.end(),
                   [&](std::size_t a, std::size_t b) { return world.authors[a].debut < world.authors[b].debut; });
  std::vector<double> author_cum;
  double pop_total = 0;
  for (auto i : by_debut) author_cum.push_back(pop_total += world.authors[i].popularity);
  const double pop_mean = pop_total / static_cast<double>(world.authors.size());

  std::vector<double> user_cum;
  double act = 0;
  for (const auto& u : world.users) user_cum.push_back(act += u.activity);

  std::unordered_map<uint64_t, std::deque<uint64_t>> histories;
  std::vector<InteractionEvent> events;
  events.reserve(cfg.n_events);
  std::size_t active = 0;
  for (std::size_t t = 0; t < cfg.n_events; ++t) {
    const double frac = static_cast<double>(t) / static_cast<double>(cfg.n_events);
    while (active < by_debut.size() && world.authors[by_debut[active]].debut <= frac) ++active;
    const std::size_t pool = std::max<std::size_t>(active, 1);

    const auto& user = world.users[rng.categorical(user_cum)];
    const auto& author = world.authors[by_debut[rng.categorical(std::span<const double>(author_cum).first(pool))]];

    InteractionEvent e;
    e.user_id = user.user_id;
    e.author_id = author.author_id;
    e.timestamp = t;
    auto& hist = histories[user.user_id];
    e.history.assign(hist.begin(), hist.end());

    const int r = std::max(cfg.rank_dim, 0);
    e.h_rank.resize(static_cast<std::size_t>(r));
    if (r > 0) e.h_rank[0] = static_cast<float>(std::log(author.popularity / pop_mean) / 4.0);
    if (r > 1) e.h_rank[1] = static_cast<float>(std::log(user.activity));
    for (int i = 2; i < r; ++i) e.h_rank[static_cast<std::size_t>(i)] = static_cast<float>(rng.normal());

    const double aff = user.topic_affinity[static_cast<std::size_t>(author.latent_topic)];
    const double bias = author.identity_bias;
    const double p_click = sigmoid(cfg.w1 * aff + cfg.w2 * bias + cfg.w3 * noise_term(e.h_rank) + cfg.bias);
    const bool click = rng.bernoulli(p_click);
    // Draws happen unconditionally so the stream position is label independent.
    const bool lv = rng.bernoulli(sigmoid(6.0 * aff - 1.0 + 0.5 * bias));
    const bool wt = rng.bernoulli(sigmoid(5.0 * aff - 3.0 + 0.5 * bias));
    const bool gt = rng.bernoulli(sigmoid(4.0 * aff - 4.0 + bias));
    e.labels = {click ? 1 : 0, click && wt ? 1 : 0, click && lv ? 1 : 0, click && gt ? 1 : 0};

    if (e.labels[static_cast<int>(Task::kLvtr)]) {
      hist.push_back(author.author_id);
      while (hist.size() > static_cast<std::size_t>(std::max(cfg.history_len, 1))) hist.pop_front();
    }
    events.push_back(std::move(e));
  }
  return events;
}

std::pair<std::vector<InteractionEvent>, std::vector<InteractionEvent>> split_train_test(
    const std::vector<InteractionEvent>& stream, double test_fraction) {
  if (test_fraction < 0.0 || test_fraction > 1.0) throw ConfigError("test_fraction must lie in [0, 1]");
  std::vector<InteractionEvent> sorted = stream;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
  const auto n = sorted.size();
  std::size_t cut = n - static_cast<std::size_t>(std::floor(static_cast<double>(n) * test_fraction));
  while (cut > 0 && cut < n && sorted[cut].timestamp == sorted[cut - 1].timestamp) ++cut;
  std::vector<InteractionEvent> train(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(cut));
  std::vector<InteractionEvent> test(sorted.begin() + static_cast<std::ptrdiff_t>(cut), sorted.end());
  return {std::move(train), std::move(test)};
}

// ---------------------------------------------------------------------------
// Files

void save_world(const World& w, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    auto out = open_out(dir / "world_config.txt");
    const auto& c = w.cfg;
    out << "seed=" << c.seed << "\nn_users=" << c.n_users << "\nn_authors=" << c.n_authors << "\ntopics=" << c.topics
        << "\np_topic=" << fmt_num(c.p_topic) << "\nzipf_s=" << fmt_num(c.zipf_s)
        << "\ndirichlet_alpha=" << fmt_num(c.dirichlet_alpha) << "\nactivity_sigma=" << fmt_num(c.activity_sigma)
        << "\nlate_debut_fraction=" << fmt_num(c.late_debut_fraction)
        << "\nlate_debut_start=" << fmt_num(c.late_debut_start) << "\nphrases_per_cell=" << c.phrases_per_cell
        << "\n";
  }
  {
    auto out = open_out(dir / "users.tsv");
    for (const auto& u : w.users) out << u.user_id << '\t' << fmt_num(u.activity) << '\t' << join_list(u.topic_affinity) << '\n';
  }
  {
    auto out = open_out(dir / "authors.tsv");
    for (const auto& a : w.authors)
      out << a.author_id << '\t' << a.latent_topic << '\t' << fmt_num(a.popularity) << '\t' << fmt_num(a.identity_bias)
          << '\t' << fmt_num(a.debut) << '\n';
  }
  std::vector<std::string> lines;
  for (const auto& a : w.anchors) lines.push_back(render_anchor(a));
  write_anchor_corpus(dir / "anchors.txt", lines);
  w.phrase_bank.save(dir / "phrase_bank.tsv");
}

World load_world(const std::filesystem::path& dir) {
  World w;
  {
    auto in = open_in(dir / "world_config.txt");
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw FormatError("world_config.txt: malformed line '" + line + "'");
      const std::string k = line.substr(0, eq);
      const std::string v = line.substr(eq + 1);
      const std::string where = "world_config.txt";
      auto& c = w.cfg;
      if (k == "seed") c.seed = parse_num<uint64_t>(v, where);
      else if (k == "n_users") c.n_users = parse_num<int>(v, where);
      else if (k == "n_authors") c.n_authors = parse_num<int>(v, where);
      else if (k == "topics") c.topics = parse_num<int>(v, where);
      else if (k == "p_topic") c.p_topic = parse_num<double>(v, where);
      else if (k == "zipf_s") c.zipf_s = parse_num<double>(v, where);
      else if (k == "dirichlet_alpha") c.dirichlet_alpha = parse_num<double>(v, where);
      else if (k == "activity_sigma") c.activity_sigma = parse_num<double>(v, where);
      else if (k == "late_debut_fraction") c.late_debut_fraction = parse_num<double>(v, where);
      else if (k == "late_debut_start") c.late_debut_start = parse_num<double>(v, where);
      else if (k == "phrases_per_cell") c.phrases_per_cell = parse_num<std::size_t>(v, where);
      else throw FormatError(where + ": unknown key " + k);
    }
  }
  {
    auto in = open_in(dir / "users.tsv");
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto f = text::split(line, "\t");
      if (f.size() != 3) throw FormatError("users.tsv: expected 3 fields");
      UserProfile u;
      u.user_id = parse_num<uint64_t>(f[0], "users.tsv");
      u.activity = parse_num<double>(f[1], "users.tsv");
      u.topic_affinity = parse_list<double>(f[2], "users.tsv");
      w.users.push_back(std::move(u));
    }
  }
  {
    auto in = open_in(dir / "authors.tsv");
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto f = text::split(line, "\t");
      if (f.size() != 5) throw FormatError("authors.tsv: expected 5 fields");
      AuthorProfile a;
      a.author_id = parse_num<uint64_t>(f[0], "authors.tsv");
      a.latent_topic = parse_num<int>(f[1], "authors.tsv");
      a.popularity = parse_num<double>(f[2], "authors.tsv");
      a.identity_bias = parse_num<double>(f[3], "authors.tsv");
      a.debut = parse_num<double>(f[4], "authors.tsv");
      w.authors.push_back(a);
    }
  }
  for (const auto& line : read_anchor_corpus(dir / "anchors.txt")) w.anchors.push_back(parse_anchor(line));
  if (w.anchors.size() != w.authors.size()) throw FormatError("anchors.txt: expected one anchor per author");
  w.phrase_bank = PhraseBank::load(dir / "phrase_bank.tsv");
  return w;
}

void write_events(const std::filesystem::path& path, const std::vector<InteractionEvent>& events) {
  auto out = open_out(path);
  for (const auto& e : events) {
    out << e.user_id << '\t' << e.author_id << '\t' << join_list(e.history) << '\t' << join_list(e.h_rank);
    for (int l : e.labels) out << '\t' << l;
    out << '\t' << e.timestamp << '\n';
  }
}

std::vector<InteractionEvent> read_events(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<InteractionEvent> events;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = path.filename().string() + ":" + std::to_string(lineno);
    const auto f = text::split(line, "\t");
    if (f.size() != 9) throw FormatError(where + ": expected 9 tab-separated fields");
    InteractionEvent e;
    e.user_id = parse_num<uint64_t>(f[0], where);
    e.author_id = parse_num<uint64_t>(f[1], where);
    e.history = parse_list<uint64_t>(f[2], where);
    e.h_rank = parse_list<float>(f[3], where);
    for (std::size_t t = 0; t < kNumTasks; ++t) {
      e.labels[t] = parse_num<int>(f[4 + t], where);
      if (e.labels[t] != 0 && e.labels[t] != 1) throw FormatError(where + ": labels must be 0 or 1");
    }
    e.timestamp = parse_num<uint64_t>(f[8], where);
    events.push_back(std::move(e));
  }
  return events;
}

}  // namespace sarm
