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

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "stutterkit/csv.hpp"
#include "stutterkit/dataset.hpp"
#include "stutterkit/error.hpp"
#include "stutterkit/features.hpp"
#include "stutterkit/labels.hpp"
#include "stutterkit/numerics.hpp"

namespace stutterkit {

/// Clip-level feature rows with their identity, as passed between CLI steps.
///
/// Stored as CSV `clip_id,podcast_id,label,f0,f1,...` with round-trip
/// precision, unlike the float32 embedding files.
struct FeatureSet {
  std::vector<std::string> clip_ids;
  std::vector<std::string> podcasts;
  std::vector<Label> labels;
  Matrix x;

  std::size_t size() const noexcept { return clip_ids.size(); }

  FeatureSet subset(const FoldDefinition& fold, Subset s) const {
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < size(); ++i)
      if (fold.of(s).count(podcasts[i])) keep.push_back(i);
    FeatureSet out;
    out.x = Matrix(keep.size(), x.cols());
    for (std::size_t r = 0; r < keep.size(); ++r) {
      out.clip_ids.push_back(clip_ids[keep[r]]);
      out.podcasts.push_back(podcasts[keep[r]]);
      out.labels.push_back(labels[keep[r]]);
      auto src = x.row(keep[r]);
      std::copy(src.begin(), src.end(), out.x.row(r).begin());
    }
    return out;
  }
};

inline void write_feature_set(const std::filesystem::path& path, const FeatureSet& f) {
  if (f.x.rows() != f.size() || f.labels.size() != f.size() || f.podcasts.size() != f.size())
    fail(ErrorCode::LengthMismatch, "feature set columns differ in length");
  std::ofstream os(path);
  if (!os) fail(ErrorCode::Io, "cannot write " + path.string());
  os << "clip_id,podcast_id,label";
  for (std::size_t j = 0; j < f.x.cols(); ++j) os << ",f" << j;
  os << '\n';
  for (std::size_t i = 0; i < f.size(); ++i) {
    os << csv::escape(f.clip_ids[i]) << ',' << csv::escape(f.podcasts[i]) << ','
       << label_name(f.labels[i]);
    for (double v : f.x.row(i)) os << ',' << csv::num(v);
    os << '\n';
  }
}

inline FeatureSet read_feature_set(const std::filesystem::path& path) {
  const auto t = csv::read(path);
  const std::string src = path.string();
  if (t.header.size() < 4 || t.header[0] != "clip_id" || t.header[1] != "podcast_id" ||
      t.header[2] != "label")
    fail(ErrorCode::MissingColumn, src + ": expected clip_id,podcast_id,label,f0,...");
  const std::size_t d = t.header.size() - 3;
  FeatureSet f;
  f.x = Matrix(t.rows.size(), d);
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    const std::string where = src + ":" + std::to_string(t.line_numbers[i]);
    auto l = parse_label(row[2]);
    if (!l) fail(ErrorCode::UnknownLabel, where + ": '" + row[2] + "'");
    f.clip_ids.push_back(row[0]);
    f.podcasts.push_back(row[1]);
    f.labels.push_back(*l);
    for (std::size_t j = 0; j < d; ++j) f.x(i, j) = csv::to_double(row[3 + j], where);
  }
  if (!f.x.all_finite()) fail(ErrorCode::NonFinitePayload, src + " contains non-finite values");
  return f;
}

}  // namespace stutterkit
