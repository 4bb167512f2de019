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


#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "stutterkit/error.hpp"
#include "stutterkit/numerics.hpp"

namespace stutterkit {

struct PooledVector {
  Vector values;
  std::string source_tag;

  std::size_t dim() const noexcept { return values.size(); }
  friend bool operator==(const PooledVector&, const PooledVector&) = default;
};

/// Mean and population standard deviation of each column, concatenated
/// as [mean_0..mean_{D-1}, std_0..std_{D-1}]. Frame order does not matter.
inline PooledVector stat_pool(const Matrix& frames, std::string source_tag = {}) {
  const std::size_t t = frames.rows();
  const std::size_t d = frames.cols();
  if (t == 0) fail(ErrorCode::EmptyInput, "stat_pool over zero frames");
  PooledVector out{Vector(2 * d, 0.0), std::move(source_tag)};
  // Each column is summed in sorted order, so the result does not depend on
  // frame order at all (bit-for-bit). Two passes: mean, then squared deviations.
  std::vector<double> col(t);
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < t; ++i) col[i] = frames(i, j);
    std::sort(col.begin(), col.end());
    double sum = 0.0;
    for (double v : col) sum += v;
    const double mean = sum / static_cast<double>(t);
    double sq = 0.0;
    for (double v : col) sq += (v - mean) * (v - mean);
    out.values[j] = mean;
    out.values[d + j] = std::sqrt(sq / static_cast<double>(t));
  }
  return out;
}

inline PooledVector concat_embeddings(std::span<const PooledVector> parts) {
  if (parts.empty()) fail(ErrorCode::EmptyList, "nothing to concatenate");
  PooledVector out;
  for (const auto& p : parts) {
    out.values.insert(out.values.end(), p.values.begin(), p.values.end());
    if (!out.source_tag.empty()) out.source_tag += '+';
    out.source_tag += p.source_tag;
  }
  return out;
}

inline PooledVector l2_normalize(const PooledVector& v) {
  double sq = 0.0;
  for (double x : v.values) sq += x * x;
  const double norm = std::sqrt(sq);
  if (!(norm > 0.0)) fail(ErrorCode::ZeroVector, "cannot normalize a zero vector");
  PooledVector out = v;
  for (auto& x : out.values) x /= norm;
  return out;
}

}  // namespace stutterkit
