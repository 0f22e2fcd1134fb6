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

#include "sarm/user_interest.hpp"

#include <algorithm>

namespace sarm {

UserHistory build_history(std::span<const uint64_t> chronological_ids, const MemoryBank& bank, int m) {
  if (m < 1) throw ConfigError("history length must be >= 1");
  const std::size_t keep = std::min(chronological_ids.size(), static_cast<std::size_t>(m));
  UserHistory h;
  h.author_ids.assign(chronological_ids.end() - static_cast<std::ptrdiff_t>(keep), chronological_ids.end());
  const int d = bank.dim();
  h.rows = Mat<float>::Zero(m, d);
  h.valid.assign(static_cast<std::size_t>(m), 0);
  const auto records = bank.batch_get(h.author_ids);
  const std::size_t offset = static_cast<std::size_t>(m) - keep;
  for (std::size_t i = 0; i < keep; ++i) {
    h.valid[offset + i] = 1;
    for (int j = 0; j < d; ++j) h.rows(static_cast<Eigen::Index>(offset + i), j) = records[i].h_cls[static_cast<std::size_t>(j)];
  }
  return h;
}

UserHistory build_history(std::span<const ViewedAuthor> past_events, const MemoryBank& bank, int m) {
  std::vector<uint64_t> ids;
  for (const auto& e : past_events)
    if (e.long_view) ids.push_back(e.author_id);
  return build_history(ids, bank, m);
}

}  // namespace sarm
