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

#include <Eigen/Dense>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "melsvc/core/error.hpp"

namespace melsvc {

/// Serialized real matrix with a shape header and the content hash of the
/// audio it was computed from.
///
/// Layout (little-endian):
///   8 bytes  magic "MSVCMAT1"
///   u64      rows
///   u64      cols
///   16 bytes source content hash (hex, ASCII)
///   f64[rows*cols] row-major values
struct MatrixFile {
  Eigen::MatrixXd values;
  std::string source_hash;  // 16 hex chars, or empty
};

inline constexpr char kMatrixMagic[8] = {'M', 'S', 'V', 'C', 'M', 'A', 'T', '1'};

inline void write_matrix_file(const std::filesystem::path& path, const Eigen::MatrixXd& m,
                              const std::string& source_hash = {}) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("io", "cannot write matrix file " + path.string());
  out.write(kMatrixMagic, sizeof kMatrixMagic);
  const std::uint64_t rows = static_cast<std::uint64_t>(m.rows());
  const std::uint64_t cols = static_cast<std::uint64_t>(m.cols());
  out.write(reinterpret_cast<const char*>(&rows), sizeof rows);
  out.write(reinterpret_cast<const char*>(&cols), sizeof cols);
  char hash[16];
  std::memset(hash, '0', sizeof hash);
  std::memcpy(hash, source_hash.data(), std::min<std::size_t>(16, source_hash.size()));
  out.write(hash, sizeof hash);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const double v = m(r, c);
      out.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
  }
  if (!out) throw data_error("io", "short write to " + path.string());
}

inline MatrixFile read_matrix_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("io", "cannot open matrix file " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMatrixMagic, sizeof magic) != 0) {
    throw data_error("format", "not a matrix file: " + path.string());
  }
  std::uint64_t rows = 0, cols = 0;
  in.read(reinterpret_cast<char*>(&rows), sizeof rows);
  in.read(reinterpret_cast<char*>(&cols), sizeof cols);
  char hash[16];
  in.read(hash, sizeof hash);
  if (!in || rows > (1ULL << 32) || cols > (1ULL << 20)) {
    throw data_error("format", "corrupt matrix header: " + path.string());
  }
  MatrixFile file;
  file.source_hash.assign(hash, hash + 16);
  file.values.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index r = 0; r < file.values.rows(); ++r) {
    for (Eigen::Index c = 0; c < file.values.cols(); ++c) {
      double v;
      in.read(reinterpret_cast<char*>(&v), sizeof v);
      file.values(r, c) = v;
    }
  }
  if (!in) throw data_error("format", "truncated matrix file: " + path.string());
  return file;
}

}  // namespace melsvc
