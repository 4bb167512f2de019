// Copyright 2026 The stutterkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Embedding files: the NPY v1.0 container restricted to little-endian
// float32, C order, two-dimensional (a 1-D shape (D,) is read as 1xD).

#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "stutterkit/error.hpp"
#include "stutterkit/numerics.hpp"

namespace stutterkit {

static_assert(std::endian::native == std::endian::little, "NPY I/O assumes a little-endian host");

/// Frame-level (T x D) or speaker-level (1 x D) embedding, widened to float64.
using EmbeddingMatrix = Matrix;

namespace npy_detail {

inline constexpr char kMagic[] = "\x93NUMPY";

inline std::string dict_value(const std::string& header, std::string_view key) {
  const std::string quoted = "'" + std::string(key) + "'";
  auto pos = header.find(quoted);
  if (pos == std::string::npos) fail(ErrorCode::BadMagic, "header lacks key " + quoted);
  pos = header.find(':', pos + quoted.size());
  if (pos == std::string::npos) fail(ErrorCode::BadMagic, "malformed header dict");
  ++pos;
  while (pos < header.size() && header[pos] == ' ') ++pos;
  std::size_t end = pos;
  if (header[pos] == '(') {
    end = header.find(')', pos);
    if (end == std::string::npos) fail(ErrorCode::BadMagic, "unterminated shape tuple");
    return header.substr(pos, end - pos + 1);
  }
  if (header[pos] == '\'') {
    end = header.find('\'', pos + 1);
    if (end == std::string::npos) fail(ErrorCode::BadMagic, "unterminated string");
    return header.substr(pos + 1, end - pos - 1);
  }
  while (end < header.size() && header[end] != ',' && header[end] != '}') ++end;
  return header.substr(pos, end - pos);
}

inline std::vector<std::size_t> parse_shape(const std::string& tuple) {
  std::vector<std::size_t> dims;
  std::size_t i = 1;  // skip '('
  while (i < tuple.size()) {
    while (i < tuple.size() && (tuple[i] == ' ' || tuple[i] == ',')) ++i;
    if (i >= tuple.size() || tuple[i] == ')') break;
    std::size_t j = i;
    while (j < tuple.size() && tuple[j] >= '0' && tuple[j] <= '9') ++j;
    if (j == i) fail(ErrorCode::BadMagic, "bad shape tuple " + tuple);
    dims.push_back(static_cast<std::size_t>(std::stoull(tuple.substr(i, j - i))));
    i = j;
  }
  return dims;
}

}  // namespace npy_detail

inline EmbeddingMatrix read_embedding(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::MissingEmbedding, "cannot open " + path.string());

  char magic[6];
  if (!in.read(magic, 6) || std::memcmp(magic, npy_detail::kMagic, 6) != 0)
    fail(ErrorCode::BadMagic, path.string() + " is not an NPY file");
  unsigned char version[2];
  if (!in.read(reinterpret_cast<char*>(version), 2)) fail(ErrorCode::BadMagic, "truncated header");

  std::uint32_t header_len = 0;
  if (version[0] == 1) {
    std::uint16_t len16 = 0;
    if (!in.read(reinterpret_cast<char*>(&len16), 2)) fail(ErrorCode::BadMagic, "truncated header");
    header_len = len16;
  } else if (version[0] == 2 || version[0] == 3) {
    if (!in.read(reinterpret_cast<char*>(&header_len), 4))
      fail(ErrorCode::BadMagic, "truncated header");
  } else {
    fail(ErrorCode::BadMagic, "unsupported NPY version " + std::to_string(version[0]));
  }
  std::string header(header_len, '\0');
  if (!in.read(header.data(), header_len)) fail(ErrorCode::BadMagic, "truncated header dict");

  const std::string descr = npy_detail::dict_value(header, "descr");
  if (descr != "<f4") fail(ErrorCode::UnsupportedDtype, "dtype " + descr + " (need <f4)");
  const std::string fortran = npy_detail::dict_value(header, "fortran_order");
  if (fortran.find("False") == std::string::npos)
    fail(ErrorCode::UnsupportedDtype, "Fortran-ordered arrays are not supported");

  auto dims = npy_detail::parse_shape(npy_detail::dict_value(header, "shape"));
  std::size_t rows = 0;
  std::size_t cols = 0;
  if (dims.size() == 1) {
    rows = 1;
    cols = dims[0];
  } else if (dims.size() == 2) {
    rows = dims[0];
    cols = dims[1];
  } else {
    fail(ErrorCode::ShapeMismatch, "expected a 1-D or 2-D array, got rank " +
                                       std::to_string(dims.size()));
  }

  const std::size_t count = rows * cols;
  std::vector<float> payload(count);
  in.read(reinterpret_cast<char*>(payload.data()),
          static_cast<std::streamsize>(count * sizeof(float)));
  const auto got = static_cast<std::size_t>(in.gcount());
  in.peek();
  if (got != count * sizeof(float) || !in.eof()) {
    fail(ErrorCode::ShapeMismatch, path.string() + ": header declares (" + std::to_string(rows) +
                                       "," + std::to_string(cols) +
                                       ") but payload length differs");
  }

  Matrix m(rows, cols);
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::isfinite(payload[i]))
      fail(ErrorCode::NonFinitePayload, path.string() + ": value " + std::to_string(i));
    m.data()[i] = static_cast<double>(payload[i]);
  }
  return m;
}

/// Writes `m` as float32. Values already representable as float32 round-trip exactly.
inline void write_embedding(const std::filesystem::path& path, const Matrix& m) {
  std::string dict = "{'descr': '<f4', 'fortran_order': False, 'shape': (" +
                     std::to_string(m.rows()) + ", " + std::to_string(m.cols()) + "), }";
  // magic(6) + version(2) + len(2) + dict + padding + '\n' is a multiple of 64.
  const std::size_t unpadded = 10 + dict.size() + 1;
  dict.append((64 - unpadded % 64) % 64, ' ');
  dict.push_back('\n');

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  out.write(npy_detail::kMagic, 6);
  const char version[2] = {1, 0};
  out.write(version, 2);
  const auto len16 = static_cast<std::uint16_t>(dict.size());
  out.write(reinterpret_cast<const char*>(&len16), 2);
  out.write(dict.data(), static_cast<std::streamsize>(dict.size()));
  std::vector<float> payload(m.data().size());
  for (std::size_t i = 0; i < payload.size(); ++i) payload[i] = static_cast<float>(m.data()[i]);
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(float)));
  if (!out) fail(ErrorCode::Io, "short write to " + path.string());
}

}  // namespace stutterkit
