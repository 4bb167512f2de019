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


// Brute-force K-nearest-neighbour voting under a Minkowski distance.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stutterkit/csv.hpp"
#include "stutterkit/error.hpp"
#include "stutterkit/labels.hpp"
#include "stutterkit/npy.hpp"
#include "stutterkit/numerics.hpp"
#include "stutterkit/scores.hpp"

namespace stutterkit {

inline double minkowski(std::span<const double> x, std::span<const double> y, double p = 2.0) {
  if (x.size() != y.size())
    fail(ErrorCode::DimMismatch, "minkowski over " + std::to_string(x.size()) + " vs " +
                                     std::to_string(y.size()) + " dims");
  if (!(p >= 1.0)) fail(ErrorCode::BadConfig, "Minkowski order must be >= 1");
  double acc = 0.0;
  if (p == 2.0) {
    for (std::size_t i = 0; i < x.size(); ++i) acc += (x[i] - y[i]) * (x[i] - y[i]);
    return std::sqrt(acc);
  }
  if (p == 1.0) {
    for (std::size_t i = 0; i < x.size(); ++i) acc += std::abs(x[i] - y[i]);
    return acc;
  }
  for (std::size_t i = 0; i < x.size(); ++i) acc += std::pow(std::abs(x[i] - y[i]), p);
  return std::pow(acc, 1.0 / p);
}

struct KnnModel {
  Matrix points;
  std::vector<Label> labels;
  std::size_t k = 5;
  double p = 2.0;
};

inline KnnModel knn_fit(Matrix points, std::vector<Label> labels, std::size_t k = 5,
                        double p = 2.0) {
  if (points.rows() != labels.size()) fail(ErrorCode::ShapeMismatch, "labels and rows differ");
  if (points.rows() == 0) fail(ErrorCode::EmptySet, "no training points");
  if (k < 1 || k > points.rows())
    fail(ErrorCode::BadConfig, "K=" + std::to_string(k) + " outside [1, " +
                                   std::to_string(points.rows()) + "]");
  if (!(p >= 1.0)) fail(ErrorCode::BadConfig, "Minkowski order must be >= 1");
  return KnnModel{std::move(points), std::move(labels), k, p};
}

/// Votes of the K nearest training points, as fractions of K.
///
/// Exactly K neighbours are used; equal distances at the boundary are taken
/// in training-index order. Among classes with equal votes the smaller summed
/// neighbour distance wins, then the earlier label.
inline Prediction knn_predict(const KnnModel& model, std::span<const double> query) {
  if (query.size() != model.points.cols())
    fail(ErrorCode::DimMismatch, "query has " + std::to_string(query.size()) + " dims, model " +
                                     std::to_string(model.points.cols()));
  const std::size_t n = model.points.rows();
  std::vector<std::pair<double, std::size_t>> dist(n);
  for (std::size_t i = 0; i < n; ++i) dist[i] = {minkowski(model.points.row(i), query, model.p), i};
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(model.k), dist.end());

  std::array<std::size_t, kNumClasses> votes{};
  std::array<double, kNumClasses> dist_sum{};
  for (std::size_t j = 0; j < model.k; ++j) {
    const auto c = index_of(model.labels[dist[j].second]);
    ++votes[c];
    dist_sum[c] += dist[j].first;
  }
  std::size_t best = 0;
  for (std::size_t c = 1; c < kNumClasses; ++c) {
    if (votes[c] > votes[best] || (votes[c] == votes[best] && dist_sum[c] < dist_sum[best]))
      best = c;
  }

  Prediction out;
  out.label = label_at(best);
  out.scores.kind = ScoreKind::VoteFraction;
  for (std::size_t c = 0; c < kNumClasses; ++c)
    out.scores.scores[c] = static_cast<double>(votes[c]) / static_cast<double>(model.k);
  return out;
}

/// Model file plus the training points it references (`<stem>.points.npy`).
inline void save_knn(const std::filesystem::path& path, const KnnModel& model) {
  auto points_path = path;
  points_path.replace_extension(".points.npy");
  write_embedding(points_path, model.points);
  std::ofstream out(path);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  out << "stutterkit-knn,1\n";
  out << "k," << model.k << "\np," << csv::num(model.p) << '\n';
  out << "train_matrix," << csv::escape(points_path.filename().string()) << '\n';
  out << "labels";
  for (auto l : model.labels) out << ',' << label_name(l);
  out << '\n';
}

inline KnnModel load_knn(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  const std::string src = path.string();
  std::string line;
  std::size_t k = 0;
  double p = 2.0;
  std::filesystem::path points_path;
  std::vector<Label> labels;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = csv::split_line(line);
    if (f[0] == "stutterkit-knn") {
      header = true;
    } else if (f[0] == "k" && f.size() == 2) {
      k = static_cast<std::size_t>(csv::to_double(f[1], src));
    } else if (f[0] == "p" && f.size() == 2) {
      p = csv::to_double(f[1], src);
    } else if (f[0] == "train_matrix" && f.size() == 2) {
      points_path = path.parent_path() / f[1];
    } else if (f[0] == "labels") {
      for (std::size_t i = 1; i < f.size(); ++i) {
        auto l = parse_label(f[i]);
        if (!l) fail(ErrorCode::UnknownLabel, src + ": '" + f[i] + "'");
        labels.push_back(*l);
      }
    } else {
      fail(ErrorCode::Malformed, src + ": unexpected record '" + f[0] + "'");
    }
  }
  if (!header) fail(ErrorCode::Malformed, src + " is not a KNN model file");
  return knn_fit(read_embedding(points_path), std::move(labels), k, p);
}

}  // namespace stutterkit
