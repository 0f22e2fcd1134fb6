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

#include "sarm/encoder.hpp"

namespace sarm {
namespace {

std::atomic<uint64_t> g_encoder_forwards{0};

}  // namespace

uint64_t encoder_forward_count() { return g_encoder_forwards.load(std::memory_order_relaxed); }

void count_encoder_forward() { g_encoder_forwards.fetch_add(1, std::memory_order_relaxed); }

}  // namespace sarm
