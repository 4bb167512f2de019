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


// Late fusion of two systems' class scores.

#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stutterkit/csv.hpp"
#include "stutterkit/error.hpp"
#include "stutterkit/labels.hpp"
#include "stutterkit/metrics.hpp"
#include "stutterkit/scores.hpp"

namespace stutterkit {

struct FusionConfig {
  double alpha = 0.9;  // weight of the contextual (w2v2) system

  void validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) fail(ErrorCode::BadConfig, "alpha must lie in [0, 1]");
  }
};

/// p = alpha * p_w2v2 + (1 - alpha) * p_ecapa. Mixing posteriors with vote
/// fractions is rejected.
inline Prediction score_fuse(const ScoreVector& p_w2v2, const ScoreVector& p_ecapa,
                             const FusionConfig& cfg) {
  cfg.validate();
  if (p_w2v2.kind != p_ecapa.kind)
    fail(ErrorCode::KindMismatch, "cannot fuse posteriors with vote fractions");
  Prediction out;
  out.scores.kind = p_w2v2.kind;
  if (cfg.alpha == 1.0) {
    out.scores = p_w2v2;
  } else if (cfg.alpha == 0.0) {
    out.scores = p_ecapa;
  } else {
    for (std::size_t c = 0; c < kNumClasses; ++c)
      out.scores.scores[c] = cfg.alpha * p_w2v2.scores[c] + (1.0 - cfg.alpha) * p_ecapa.scores[c];
  }
  out.label = out.scores.argmax();
  return out;
}

inline std::vector<double> default_alpha_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 10; ++i) g.push_back(i / 10.0);
  return g;
}

struct AlphaSweep {
  std::vector<std::pair<double, double>> uar_by_alpha;  // (alpha, UAR %)
  double best_alpha = 0.0;                              // first grid point with the top UAR
  double best_uar = 0.0;
};

inline AlphaSweep sweep_alpha(std::span<const ScoreVector> scores_w2v2,
                              std::span<const ScoreVector> scores_ecapa,
                              std::span<const Label> labels,
                              std::span<const double> grid) {
  if (scores_w2v2.size() != scores_ecapa.size() || scores_w2v2.size() != labels.size())
    fail(ErrorCode::LengthMismatch, "score lists and labels must align");
  if (grid.empty()) fail(ErrorCode::BadConfig, "empty alpha grid");
  AlphaSweep sweep;
  bool first = true;
  for (double a : grid) {
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < labels.size(); ++i)
      cm.add(labels[i], score_fuse(scores_w2v2[i], scores_ecapa[i], FusionConfig{a}).label);
    const double uar = compute_metrics(cm).uar;
    sweep.uar_by_alpha.emplace_back(a, uar);
    if (first || uar > sweep.best_uar) {
      sweep.best_alpha = a;
      sweep.best_uar = uar;
      first = false;
    }
  }
  return sweep;
}

struct ScoreFile {
  std::vector<std::string> clip_ids;
  std::vector<ScoreVector> scores;
};

/// `clip_id,score_R,score_P,score_B,score_I,score_F`
inline void write_scores(const std::filesystem::path& path, const ScoreFile& f) {
  if (f.clip_ids.size() != f.scores.size()) fail(ErrorCode::LengthMismatch, "ids vs scores");
  std::ofstream os(path);
  if (!os) fail(ErrorCode::Io, "cannot write " + path.string());
  os << "clip_id";
  for (auto l : kAllLabels) os << ",score_" << label_name(l);
  os << '\n';
  for (std::size_t i = 0; i < f.scores.size(); ++i) {
    os << csv::escape(f.clip_ids[i]);
    for (double v : f.scores[i].scores) os << ',' << csv::num(v);
    os << '\n';
  }
}

inline ScoreFile read_scores(const std::filesystem::path& path,
                             ScoreKind kind = ScoreKind::Posterior) {
  const auto t = csv::read(path);
  const std::string src = path.string();
  const auto c_id = t.column("clip_id", src);
  std::array<std::size_t, kNumClasses> cols{};
  for (auto l : kAllLabels) cols[index_of(l)] = t.column("score_" + std::string(label_name(l)), src);
  ScoreFile f;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const std::string where = src + ":" + std::to_string(t.line_numbers[i]);
    ScoreVector s;
    s.kind = kind;
    for (std::size_t c = 0; c < kNumClasses; ++c) s.scores[c] = csv::to_double(t.rows[i][cols[c]], where);
    f.clip_ids.push_back(t.rows[i][c_id]);
    f.scores.push_back(s);
  }
  return f;
}

/// Reorders `b` to follow the clip order of `a`; every clip must be present in both.
inline ScoreFile align_scores(const ScoreFile& a, const ScoreFile& b) {
  std::map<std::string, std::size_t> where;
  for (std::size_t i = 0; i < b.clip_ids.size(); ++i) where[b.clip_ids[i]] = i;
  if (a.clip_ids.size() != b.clip_ids.size())
    fail(ErrorCode::LengthMismatch, "score files cover different clip counts");
  ScoreFile out;
  for (const auto& id : a.clip_ids) {
    auto it = where.find(id);
    if (it == where.end()) fail(ErrorCode::LengthMismatch, "clip '" + id + "' missing from one file");
    out.clip_ids.push_back(id);
    out.scores.push_back(b.scores[it->second]);
  }
  return out;
}

}  // namespace stutterkit
