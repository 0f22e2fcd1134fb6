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

// Author-indexed store of (h_CLS, h_TAR). Lookups are hash-map reads under a
// shared lock; puts take the exclusive lock, so reads of a key always see the
// latest completed put.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

namespace sarm {

struct AuthorRecord {
  std::vector<float> h_cls;
  std::vector<float> h_tar;
  uint64_t version = 0;
  uint64_t updated_step = 0;

  bool operator==(const AuthorRecord&) const = default;
};

class MemoryBank {
 public:
  explicit MemoryBank(int d = 0);
  MemoryBank(const MemoryBank& other);
  MemoryBank& operator=(const MemoryBank& other);
  MemoryBank(MemoryBank&& other) noexcept;
  MemoryBank& operator=(MemoryBank&& other) noexcept;

  int dim() const { return d_; }
  std::size_t size() const;

  /// Stores the vectors; the stored version is the previous version + 1.
  /// Throws ShapeError on a dimension mismatch.
  void put(uint64_t author_id, std::span<const float> h_cls, std::span<const float> h_tar, uint64_t step);
  void put(uint64_t author_id, const AuthorRecord& record);

  /// Stored record, or the zero default (version 0) on a miss.
  AuthorRecord get(uint64_t author_id) const;
  bool contains(uint64_t author_id) const;
  std::vector<AuthorRecord> batch_get(std::span<const uint64_t> ids) const;
  const AuthorRecord& default_record() const { return default_; }

  /// Ids in ascending order.
  std::vector<uint64_t> ids() const;

  /// "SARMBANK", u32 version 1, u32 d, u64 count, then per record (ascending
  /// id): u64 id, u64 version, u64 updated_step, d f32 h_cls, d f32 h_tar.
  std::string serialize() const;
  void save(const std::filesystem::path& path) const;
  static MemoryBank deserialize(std::string_view bytes);
  static MemoryBank load(const std::filesystem::path& path);

  bool operator==(const MemoryBank& other) const;

 private:
  static constexpr uint32_t kEmpty = 0xffffffffu;
  struct Slot {
    uint64_t key = 0;
    uint32_t index = kEmpty;
  };

  // Open-addressing index into flat record storage, so a lookup touches one
  // slot and one contiguous payload regardless of bank size.
  std::optional<uint32_t> find_locked(uint64_t author_id) const;
  uint32_t insert_locked(uint64_t author_id);
  void rehash_locked(std::size_t capacity);
  AuthorRecord record_locked(uint32_t index) const;

  int d_;
  AuthorRecord default_;
  std::vector<Slot> slots_;
  std::vector<uint64_t> keys_, versions_, steps_;
  std::vector<float> data_;  // per record: h_cls then h_tar
  mutable std::shared_mutex mu_;
};

}  // namespace sarm
