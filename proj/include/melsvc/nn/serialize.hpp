// Copyright 2026 The melsvc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include <json.hpp>

#include "melsvc/core/hash.hpp"
#include "melsvc/nn/layers.hpp"

namespace melsvc::nn {

/// Order-sensitive digest over parameter names, shapes and values.
inline std::string parameter_digest(const ParamList& params) {
  Fnv1a h;
  for (const Parameter* p : params) {
    h.update(p->name);
    h.update_u64(static_cast<std::uint64_t>(p->value.rows()));
    h.update_u64(static_cast<std::uint64_t>(p->value.cols()));
    h.update(p->value.data(), static_cast<std::size_t>(p->value.size()) * sizeof(double));
  }
  return h.hex();
}

inline constexpr char kCheckpointMagic[8] = {'M', 'S', 'V', 'C', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointSchema = 1;

/// Named parameter values plus JSON metadata.
///
/// Layout (little-endian): magic, u32 schema, u64 metadata length, metadata
/// UTF-8 JSON, u64 tensor count, then per tensor: u32 name length, name,
/// u64 rows, u64 cols, f64 column-major values.
struct Checkpoint {
  nlohmann::json metadata = nlohmann::json::object();
  std::map<std::string, Mat> tensors;

  void store(const ParamList& params) {
    for (const Parameter* p : params) tensors[p->name] = p->value;
  }

  /// Copies stored values into `params`; every name must be present with a
  /// matching shape.
  void restore(const ParamList& params) const {
    for (Parameter* p : params) {
      const auto it = tensors.find(p->name);
      if (it == tensors.end()) throw data_error("compatibility", "checkpoint lacks parameter " + p->name);
      if (it->second.rows() != p->value.rows() || it->second.cols() != p->value.cols()) {
        throw data_error("compatibility", "checkpoint shape mismatch for " + p->name);
      }
      p->value = it->second;
    }
  }
};

namespace detail {
template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
}  // namespace detail

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw data_error("io", "cannot write checkpoint " + path.string());
    out.write(kCheckpointMagic, sizeof kCheckpointMagic);
    detail::put<std::uint32_t>(out, kCheckpointSchema);
    const std::string meta = ckpt.metadata.dump();
    detail::put<std::uint64_t>(out, meta.size());
    out.write(meta.data(), static_cast<std::streamsize>(meta.size()));
    detail::put<std::uint64_t>(out, ckpt.tensors.size());
    for (const auto& [name, m] : ckpt.tensors) {
      detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
      out.write(name.data(), static_cast<std::streamsize>(name.size()));
      detail::put<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
      detail::put<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
      out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    }
    if (!out) throw data_error("io", "short write to " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("io", "cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) {
    throw data_error("format", "not a checkpoint: " + path.string());
  }
  const auto schema = detail::get<std::uint32_t>(in);
  if (schema != kCheckpointSchema) {
    throw data_error("compatibility", "unsupported checkpoint schema " + std::to_string(schema));
  }
  Checkpoint ckpt;
  const auto meta_len = detail::get<std::uint64_t>(in);
  if (!in || meta_len > (1ULL << 30)) throw data_error("format", "corrupt checkpoint header: " + path.string());
  std::string meta(meta_len, '\0');
  in.read(meta.data(), static_cast<std::streamsize>(meta_len));
  ckpt.metadata = nlohmann::json::parse(meta);
  const auto count = detail::get<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < count && in; ++i) {
    const auto len = detail::get<std::uint32_t>(in);
    if (len > 4096) throw data_error("format", "corrupt tensor name in " + path.string());
    std::string name(len, '\0');
    in.read(name.data(), len);
    const auto rows = detail::get<std::uint64_t>(in);
    const auto cols = detail::get<std::uint64_t>(in);
    if (rows * cols > (1ULL << 31)) throw data_error("format", "corrupt tensor shape in " + path.string());
    Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    ckpt.tensors.emplace(std::move(name), std::move(m));
  }
  if (!in) throw data_error("format", "truncated checkpoint: " + path.string());
  return ckpt;
}

}  // namespace melsvc::nn
