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

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "sarm/model.hpp"

namespace sarm {
namespace {

static_assert(std::endian::native == std::endian::little, "snapshots are written in host (little-endian) order");

constexpr std::string_view kHeader = "SARM-PARAMS v1\n";

template <typename T>
void put_le(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T get_le(std::string_view bytes, std::size_t& pos, const std::string& what) {
  if (pos + sizeof(T) > bytes.size())
    throw FormatError("parameter snapshot truncated reading " + what + " at offset " + std::to_string(pos));
  T v;
  std::memcpy(&v, bytes.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

std::string serialize_params(const ModelParams<float>& params) {
  std::string out(kHeader);
  uint32_t sections = 0;
  params.visit([&](const std::string&, const Mat<float>&) { ++sections; });
  put_le<uint32_t>(out, sections);
  params.visit([&](const std::string& name, const Mat<float>& m) {
    put_le<uint32_t>(out, static_cast<uint32_t>(name.size()));
    out += name;
    put_le<uint32_t>(out, static_cast<uint32_t>(m.rows()));
    put_le<uint32_t>(out, static_cast<uint32_t>(m.cols()));
    out.append(reinterpret_cast<const char*>(m.data()), sizeof(float) * static_cast<std::size_t>(m.size()));
  });
  return out;
}

void save_params(const ModelParams<float>& params, const std::filesystem::path& path) {
  const std::string bytes = serialize_params(params);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MissingFileError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

ModelParams<float> load_params(const ModelConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFileError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();
  if (!std::string_view(bytes).starts_with(kHeader)) throw FormatError(path.string() + ": bad snapshot header at offset 0");
  std::size_t pos = kHeader.size();
  const auto sections = get_le<uint32_t>(bytes, pos, "section count");
  std::map<std::string, Mat<float>> loaded;
  for (uint32_t s = 0; s < sections; ++s) {
    const auto len = get_le<uint32_t>(bytes, pos, "name length");
    if (pos + len > bytes.size()) throw FormatError(path.string() + ": truncated section name at offset " + std::to_string(pos));
    std::string name = bytes.substr(pos, len);
    pos += len;
    const auto rows = get_le<uint32_t>(bytes, pos, name + " rows");
    const auto cols = get_le<uint32_t>(bytes, pos, name + " cols");
    const std::size_t n = static_cast<std::size_t>(rows) * cols;
    if (pos + n * sizeof(float) > bytes.size())
      throw FormatError(path.string() + ": truncated payload of " + name + " at offset " + std::to_string(pos));
    Mat<float> m(rows, cols);
    std::memcpy(m.data(), bytes.data() + pos, n * sizeof(float));
    pos += n * sizeof(float);
    loaded.emplace(std::move(name), std::move(m));
  }
  if (pos != bytes.size()) throw FormatError(path.string() + ": trailing bytes at offset " + std::to_string(pos));

  ModelParams<float> p = init_model<float>(cfg, 0);
  p.visit([&](const std::string& name, Mat<float>& m) {
    const auto it = loaded.find(name);
    if (it == loaded.end()) throw FormatError(path.string() + ": missing section " + name);
    if (it->second.rows() != m.rows() || it->second.cols() != m.cols())
      throw FormatError(path.string() + ": section " + name + " has shape " + std::to_string(it->second.rows()) + "x" +
                        std::to_string(it->second.cols()) + ", expected " + std::to_string(m.rows()) + "x" +
                        std::to_string(m.cols()));
    m = std::move(it->second);
    loaded.erase(it);
  });
  if (!loaded.empty()) throw FormatError(path.string() + ": unexpected section " + loaded.begin()->first);
  return p;
}

}  // namespace sarm
