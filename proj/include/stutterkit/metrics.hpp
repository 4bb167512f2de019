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


// Confusion matrices, recall/accuracy/UAR, fold aggregation and the
// results table.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "stutterkit/error.hpp"
#include "stutterkit/labels.hpp"

namespace stutterkit {

/// Rows are true labels, columns predictions, both in label order.
struct ConfusionMatrix {
  std::array<std::array<long, kNumClasses>, kNumClasses> counts{};

  void add(Label truth, Label predicted, long n = 1) {
    counts[index_of(truth)][index_of(predicted)] += n;
  }
  long row_sum(std::size_t r) const {
    long s = 0;
    for (long v : counts[r]) s += v;
    return s;
  }
  long total() const {
    long s = 0;
    for (std::size_t r = 0; r < kNumClasses; ++r) s += row_sum(r);
    return s;
  }
  long diagonal() const {
    long s = 0;
    for (std::size_t r = 0; r < kNumClasses; ++r) s += counts[r][r];
    return s;
  }
  ConfusionMatrix& operator+=(const ConfusionMatrix& o) {
    for (std::size_t r = 0; r < kNumClasses; ++r)
      for (std::size_t c = 0; c < kNumClasses; ++c) counts[r][c] += o.counts[r][c];
    return *this;
  }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

/// Metrics in percent. An empty true class has no recall (nullopt) and is
/// left out of the UAR mean.
struct EvalReport {
  std::string system;
  int fold_id = 0;
  std::array<std::optional<double>, kNumClasses> recall;
  double total_accuracy = 0.0;
  double uar = 0.0;
  ConfusionMatrix confusion;
  std::vector<std::string> warnings;
};

inline EvalReport compute_metrics(const ConfusionMatrix& cm, std::string system = {},
                                  int fold_id = 0) {
  const long total = cm.total();
  if (total <= 0) fail(ErrorCode::EmptyMatrix, "confusion matrix has no samples");
  EvalReport rep;
  rep.system = std::move(system);
  rep.fold_id = fold_id;
  rep.confusion = cm;
  double sum = 0.0;
  int defined = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const long n = cm.row_sum(c);
    if (n == 0) {
      rep.warnings.push_back("class " + std::string(label_name(label_at(c))) +
                             " absent from the test set; recall undefined and excluded from UAR");
      continue;
    }
    const double r = 100.0 * static_cast<double>(cm.counts[c][c]) / static_cast<double>(n);
    rep.recall[c] = r;
    sum += r;
    ++defined;
  }
  rep.total_accuracy = 100.0 * static_cast<double>(cm.diagonal()) / static_cast<double>(total);
  rep.uar = sum / defined;
  return rep;
}

struct Spread {
  double mean = 0.0;
  double stddev = 0.0;  // population, across folds
  double min = 0.0;
  double max = 0.0;
};

inline Spread spread_of(const std::vector<double>& v) {
  Spread s;
  if (v.empty()) return s;
  s.min = *std::min_element(v.begin(), v.end());
  s.max = *std::max_element(v.begin(), v.end());
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  for (double x : v) s.stddev += (x - s.mean) * (x - s.mean);
  s.stddev = std::sqrt(s.stddev / static_cast<double>(v.size()));
  return s;
}

struct SummaryRow {
  std::string system;
  std::size_t folds = 0;
  // Fold-then-average (the headline numbers).
  std::array<std::optional<double>, kNumClasses> recall;
  double total_accuracy = 0.0;
  double uar = 0.0;
  Spread uar_spread;
  Spread accuracy_spread;
  // Mean of the averaged per-class recalls.
  double uar_of_mean_recalls = 0.0;
  // Metrics of the summed confusion matrices.
  std::array<std::optional<double>, kNumClasses> pooled_recall;
  double pooled_total_accuracy = 0.0;
  double pooled_uar = 0.0;
};

inline SummaryRow aggregate(const std::vector<EvalReport>& reports, std::size_t expected_folds = 10) {
  if (reports.size() != expected_folds)
    fail(ErrorCode::CountMismatch, "expected " + std::to_string(expected_folds) +
                                       " fold reports, got " + std::to_string(reports.size()));
  SummaryRow s;
  s.system = reports.front().system;
  s.folds = reports.size();
  std::vector<double> uars, accs;
  ConfusionMatrix pooled;
  for (const auto& r : reports) {
    if (r.system != s.system)
      fail(ErrorCode::CountMismatch, "reports mix systems '" + s.system + "' and '" + r.system + "'");
    uars.push_back(r.uar);
    accs.push_back(r.total_accuracy);
    pooled += r.confusion;
  }
  s.uar_spread = spread_of(uars);
  s.accuracy_spread = spread_of(accs);
  s.uar = s.uar_spread.mean;
  s.total_accuracy = s.accuracy_spread.mean;

  double recall_sum = 0.0;
  int recall_defined = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    std::vector<double> v;
    for (const auto& r : reports)
      if (r.recall[c]) v.push_back(*r.recall[c]);
    if (v.empty()) continue;
    s.recall[c] = spread_of(v).mean;
    recall_sum += *s.recall[c];
    ++recall_defined;
  }
  s.uar_of_mean_recalls = recall_defined ? recall_sum / recall_defined : 0.0;

  const auto p = compute_metrics(pooled, s.system);
  s.pooled_recall = p.recall;
  s.pooled_total_accuracy = p.total_accuracy;
  s.pooled_uar = p.uar;
  return s;
}

namespace report_detail {
inline std::string fixed2(std::optional<double> v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", *v);
  return buf;
}
}  // namespace report_detail

/// Markdown table with columns Model | R | P | B | I | F | TA | UAR(%).
inline std::string render_report(const std::vector<SummaryRow>& rows) {
  using report_detail::fixed2;
  std::ostringstream os;
  os << "| Model | R | P | B | I | F | TA | UAR(%) |\n";
  os << "|---|---:|---:|---:|---:|---:|---:|---:|\n";
  for (const auto& r : rows) {
    os << "| " << r.system;
    for (auto l : kAllLabels) os << " | " << fixed2(r.recall[index_of(l)]);
    os << " | " << fixed2(r.total_accuracy) << " | " << fixed2(r.uar) << " |\n";
  }
  return os.str();
}

/// Companion table: spread across folds and the alternative aggregations.
inline std::string render_diagnostics(const std::vector<SummaryRow>& rows) {
  using report_detail::fixed2;
  std::ostringstream os;
  os << "| Model | folds | UAR mean | UAR std | UAR min | UAR max | TA std | "
        "UAR of mean recalls | pooled TA | pooled UAR |\n";
  os << "|---|---:|---:|---:|---:|---:|---:|---:|---:|---:|\n";
  for (const auto& r : rows) {
    os << "| " << r.system << " | " << r.folds << " | " << fixed2(r.uar) << " | "
       << fixed2(r.uar_spread.stddev) << " | " << fixed2(r.uar_spread.min) << " | "
       << fixed2(r.uar_spread.max) << " | " << fixed2(r.accuracy_spread.stddev) << " | "
       << fixed2(r.uar_of_mean_recalls) << " | " << fixed2(r.pooled_total_accuracy) << " | "
       << fixed2(r.pooled_uar) << " |\n";
  }
  return os.str();
}

// JSON round trip (full precision).

inline nlohmann::ordered_json recall_json(const std::array<std::optional<double>, kNumClasses>& r) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (auto l : kAllLabels) {
    const auto& v = r[index_of(l)];
    j[std::string(label_name(l))] = v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  }
  return j;
}

inline std::array<std::optional<double>, kNumClasses> recall_from_json(const nlohmann::ordered_json& j) {
  std::array<std::optional<double>, kNumClasses> r;
  for (auto l : kAllLabels) {
    const auto& v = j.at(std::string(label_name(l)));
    if (!v.is_null()) r[index_of(l)] = v.get<double>();
  }
  return r;
}

inline nlohmann::ordered_json to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["system"] = r.system;
  j["fold_id"] = r.fold_id;
  j["recall"] = recall_json(r.recall);
  j["total_accuracy"] = r.total_accuracy;
  j["uar"] = r.uar;
  nlohmann::ordered_json cm = nlohmann::ordered_json::array();
  for (const auto& row : r.confusion.counts) cm.push_back(row);
  j["confusion"] = cm;
  j["warnings"] = r.warnings;
  return j;
}

inline EvalReport eval_report_from_json(const nlohmann::ordered_json& j) {
  EvalReport r;
  r.system = j.at("system").get<std::string>();
  r.fold_id = j.at("fold_id").get<int>();
  r.recall = recall_from_json(j.at("recall"));
  r.total_accuracy = j.at("total_accuracy").get<double>();
  r.uar = j.at("uar").get<double>();
  const auto& cm = j.at("confusion");
  for (std::size_t a = 0; a < kNumClasses; ++a)
    for (std::size_t b = 0; b < kNumClasses; ++b) r.confusion.counts[a][b] = cm.at(a).at(b).get<long>();
  r.warnings = j.value("warnings", std::vector<std::string>{});
  return r;
}

inline nlohmann::ordered_json spread_json(const Spread& s) {
  return {{"mean", s.mean}, {"std", s.stddev}, {"min", s.min}, {"max", s.max}};
}

inline Spread spread_from_json(const nlohmann::ordered_json& j) {
  return {j.at("mean").get<double>(), j.at("std").get<double>(), j.at("min").get<double>(),
          j.at("max").get<double>()};
}

inline nlohmann::ordered_json to_json(const SummaryRow& s) {
  nlohmann::ordered_json j;
  j["system"] = s.system;
  j["folds"] = s.folds;
  j["recall"] = recall_json(s.recall);
  j["total_accuracy"] = s.total_accuracy;
  j["uar"] = s.uar;
  j["uar_spread"] = spread_json(s.uar_spread);
  j["accuracy_spread"] = spread_json(s.accuracy_spread);
  j["uar_of_mean_recalls"] = s.uar_of_mean_recalls;
  j["pooled"] = {{"recall", recall_json(s.pooled_recall)},
                 {"total_accuracy", s.pooled_total_accuracy},
                 {"uar", s.pooled_uar}};
  return j;
}

inline SummaryRow summary_from_json(const nlohmann::ordered_json& j) {
  SummaryRow s;
  s.system = j.at("system").get<std::string>();
  s.folds = j.at("folds").get<std::size_t>();
  s.recall = recall_from_json(j.at("recall"));
  s.total_accuracy = j.at("total_accuracy").get<double>();
  s.uar = j.at("uar").get<double>();
  s.uar_spread = spread_from_json(j.at("uar_spread"));
  s.accuracy_spread = spread_from_json(j.at("accuracy_spread"));
  s.uar_of_mean_recalls = j.at("uar_of_mean_recalls").get<double>();
  const auto& p = j.at("pooled");
  s.pooled_recall = recall_from_json(p.at("recall"));
  s.pooled_total_accuracy = p.at("total_accuracy").get<double>();
  s.pooled_uar = p.at("uar").get<double>();
  return s;
}

inline void write_confusion_csv(const std::filesystem::path& path, const ConfusionMatrix& cm) {
  std::ofstream os(path);
  if (!os) fail(ErrorCode::Io, "cannot write " + path.string());
  os << "true\\pred";
  for (auto l : kAllLabels) os << ',' << label_name(l);
  os << '\n';
  for (auto t : kAllLabels) {
    os << label_name(t);
    for (auto p : kAllLabels) os << ',' << cm.counts[index_of(t)][index_of(p)];
    os << '\n';
  }
}

}  // namespace stutterkit
