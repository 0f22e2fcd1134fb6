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

#include "sarm/memory_bank.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <mutex>
#include <sstream>

#include "sarm/errors.hpp"

namespace sarm {
namespace {

static_assert(std::endian::native == std::endian::little, "bank files are written in host (little-endian) order");

constexpr std::string_view kMagic = "SARMBANK";
constexpr uint32_t kFormatVersion = 1;

template <typename T>
void put_le(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T read(const char* what) {
    if (pos_ + sizeof(T) > bytes_.size())
      throw FormatError(std::string("bank file truncated reading ") + what + " at offset " + std::to_string(pos_));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::size_t offset() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

uint64_t mix_key(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

MemoryBank::MemoryBank(int d) : d_(d) {
  default_.h_cls.assign(static_cast<std::size_t>(std::max(d, 0)), 0.0f);
  default_.h_tar.assign(static_cast<std::size_t>(std::max(d, 0)), 0.0f);
}

MemoryBank::MemoryBank(const MemoryBank& other) {
  std::shared_lock lock(other.mu_);
  d_ = other.d_;
  default_ = other.default_;
  slots_ = other.slots_;
  keys_ = other.keys_;
  versions_ = other.versions_;
  steps_ = other.steps_;
  data_ = other.data_;
}

MemoryBank& MemoryBank::operator=(const MemoryBank& other) {
  if (this == &other) return *this;
  MemoryBank copy(other);
  *this = std::move(copy);
  return *this;
}

MemoryBank::MemoryBank(MemoryBank&& other) noexcept
    : d_(other.d_),
      default_(std::move(other.default_)),
      slots_(std::move(other.slots_)),
      keys_(std::move(other.keys_)),
      versions_(std::move(other.versions_)),
      steps_(std::move(other.steps_)),
      data_(std::move(other.data_)) {}

MemoryBank& MemoryBank::operator=(MemoryBank&& other) noexcept {
  std::unique_lock lock(mu_);
  d_ = other.d_;
  default_ = std::move(other.default_);
  slots_ = std::move(other.slots_);
  keys_ = std::move(other.keys_);
  versions_ = std::move(other.versions_);
  steps_ = std::move(other.steps_);
  data_ = std::move(other.data_);
  return *this;
}

std::optional<uint32_t> MemoryBank::find_locked(uint64_t author_id) const {
  if (slots_.empty()) return std::nullopt;
  const std::size_t mask = slots_.size() - 1;
  for (std::size_t i = mix_key(author_id) & mask;; i = (i + 1) & mask) {
    const Slot& s = slots_[i];
    if (s.index == kEmpty) return std::nullopt;
    if (s.key == author_id) return s.index;
  }
}

void MemoryBank::rehash_locked(std::size_t capacity) {
  slots_.assign(capacity, Slot{});
  const std::size_t mask = capacity - 1;
  for (uint32_t idx = 0; idx < keys_.size(); ++idx) {
    std::size_t i = mix_key(keys_[idx]) & mask;
    while (slots_[i].index != kEmpty) i = (i + 1) & mask;
    slots_[i] = {keys_[idx], idx};
  }
}

uint32_t MemoryBank::insert_locked(uint64_t author_id) {
  if (auto idx = find_locked(author_id)) return *idx;
  if (keys_.size() >= 0xfffffff0u) throw ShapeError("memory bank is full");
  // Keep the load factor at or below one half.
  if (2 * (keys_.size() + 1) > slots_.size()) rehash_locked(std::max<std::size_t>(16, 2 * slots_.size()));
  const auto idx = static_cast<uint32_t>(keys_.size());
  keys_.push_back(author_id);
  versions_.push_back(0);
  steps_.push_back(0);
  data_.resize(data_.size() + 2 * static_cast<std::size_t>(d_), 0.0f);
  const std::size_t mask = slots_.size() - 1;
  std::size_t i = mix_key(author_id) & mask;
  while (slots_[i].index != kEmpty) i = (i + 1) & mask;
  slots_[i] = {author_id, idx};
  return idx;
}

AuthorRecord MemoryBank::record_locked(uint32_t index) const {
  const auto d = static_cast<std::size_t>(d_);
  const float* p = data_.data() + 2 * d * index;
  return {std::vector<float>(p, p + d), std::vector<float>(p + d, p + 2 * d), versions_[index], steps_[index]};
}

std::size_t MemoryBank::size() const {
  std::shared_lock lock(mu_);
  return keys_.size();
}

void MemoryBank::put(uint64_t author_id, std::span<const float> h_cls, std::span<const float> h_tar,
                     uint64_t step) {
  if (h_cls.size() != static_cast<std::size_t>(d_) || h_tar.size() != static_cast<std::size_t>(d_))
    throw ShapeError("memory bank put: expected dimension " + std::to_string(d_) + ", got (" +
                     std::to_string(h_cls.size()) + ", " + std::to_string(h_tar.size()) + ")");
  std::unique_lock lock(mu_);
  const uint32_t idx = insert_locked(author_id);
  float* p = data_.data() + 2 * h_cls.size() * idx;
  std::copy(h_cls.begin(), h_cls.end(), p);
  std::copy(h_tar.begin(), h_tar.end(), p + h_cls.size());
  versions_[idx] += 1;
  steps_[idx] = step;
}

void MemoryBank::put(uint64_t author_id, const AuthorRecord& record) {
  put(author_id, record.h_cls, record.h_tar, record.updated_step);
}

AuthorRecord MemoryBank::get(uint64_t author_id) const {
  std::shared_lock lock(mu_);
  const auto idx = find_locked(author_id);
  return idx ? record_locked(*idx) : default_;
}

bool MemoryBank::contains(uint64_t author_id) const {
  std::shared_lock lock(mu_);
  return find_locked(author_id).has_value();
}

std::vector<AuthorRecord> MemoryBank::batch_get(std::span<const uint64_t> ids) const {
  std::vector<AuthorRecord> out;
  out.reserve(ids.size());
  std::shared_lock lock(mu_);
  for (auto id : ids) {
    const auto idx = find_locked(id);
    out.push_back(idx ? record_locked(*idx) : default_);
  }
  return out;
}

std::vector<uint64_t> MemoryBank::ids() const {
  std::shared_lock lock(mu_);
  std::vector<uint64_t> out = keys_;
  std::sort(out.begin(), out.end());
  return out;
}

std::string MemoryBank::serialize() const {
  std::shared_lock lock(mu_);
  std::vector<uint32_t> order(keys_.size());
  for (uint32_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](uint32_t a, uint32_t b) { return keys_[a] < keys_[b]; });
  std::string out(kMagic);
  put_le<uint32_t>(out, kFormatVersion);
  put_le<uint32_t>(out, static_cast<uint32_t>(d_));
  put_le<uint64_t>(out, order.size());
  const auto width = 2 * static_cast<std::size_t>(d_);
  for (auto idx : order) {
    put_le<uint64_t>(out, keys_[idx]);
    put_le<uint64_t>(out, versions_[idx]);
    put_le<uint64_t>(out, steps_[idx]);
    const float* p = data_.data() + width * idx;
    for (std::size_t j = 0; j < width; ++j) put_le<float>(out, p[j]);
  }
  return out;
}

void MemoryBank::save(const std::filesystem::path& path) const {
  const std::string bytes = serialize();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MissingFileError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

MemoryBank MemoryBank::deserialize(std::string_view bytes) {
  if (bytes.size() < kMagic.size() || bytes.substr(0, kMagic.size()) != kMagic)
    throw FormatError("bank file: bad magic at offset 0");
  Reader r(bytes.substr(kMagic.size()));
  const auto version = r.read<uint32_t>("format version");
  if (version != kFormatVersion)
    throw FormatError("bank file: unsupported format version " + std::to_string(version) + " at offset 8");
  const auto d = r.read<uint32_t>("dimension");
  const auto count = r.read<uint64_t>("record count");
  MemoryBank bank(static_cast<int>(d));
  for (uint64_t i = 0; i < count; ++i) {
    const auto id = r.read<uint64_t>("author id");
    if (bank.find_locked(id))
      throw FormatError("bank file: duplicate author id at offset " + std::to_string(r.offset() + kMagic.size() - 8));
    const auto version = r.read<uint64_t>("version");
    const auto step = r.read<uint64_t>("updated step");
    const uint32_t idx = bank.insert_locked(id);
    bank.versions_[idx] = version;
    bank.steps_[idx] = step;
    float* p = bank.data_.data() + 2 * static_cast<std::size_t>(d) * idx;
    for (std::size_t j = 0; j < 2 * static_cast<std::size_t>(d); ++j) p[j] = r.read<float>("vectors");
  }
  if (!r.done())
    throw FormatError("bank file: trailing bytes at offset " + std::to_string(r.offset() + kMagic.size()));
  return bank;
}

MemoryBank MemoryBank::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFileError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

bool MemoryBank::operator==(const MemoryBank& other) const {
  if (this == &other) return true;
  std::shared_lock a(mu_);
  std::shared_lock b(other.mu_);
  if (d_ != other.d_ || keys_.size() != other.keys_.size()) return false;
  for (uint32_t i = 0; i < keys_.size(); ++i) {
    const auto j = other.find_locked(keys_[i]);
    if (!j || record_locked(i) != other.record_locked(*j)) return false;
  }
  return true;
}

}  // namespace sarm
