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


// Gaussian naive-Bayes back-end with diagonal class covariances.

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "stutterkit/csv.hpp"
#include "stutterkit/error.hpp"
#include "stutterkit/labels.hpp"
#include "stutterkit/numerics.hpp"
#include "stutterkit/scores.hpp"

namespace stutterkit {

struct GaussianNbModel {
  std::vector<Label> classes;    // classes seen in training, label order
  std::vector<Vector> means;     // per class, d
  std::vector<Vector> variances; // per class, d, each >= variance_floor
  Vector priors;                 // per class, sums to 1
  double variance_floor = 0.0;

  std::size_t dim() const noexcept { return means.empty() ? 0 : means.front().size(); }
};

/// Class means, population variances (floored at 1e-9 of the largest
/// variance over all classes and dimensions) and frequency priors.
inline GaussianNbModel gnb_fit(const Matrix& x, std::span<const Label> y) {
  if (x.rows() != y.size()) fail(ErrorCode::ShapeMismatch, "labels and rows differ in count");
  if (x.rows() == 0) fail(ErrorCode::EmptySet, "no training samples");
  std::map<Label, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < y.size(); ++i) members[y[i]].push_back(i);

  const std::size_t d = x.cols();
  GaussianNbModel m;
  double largest = 0.0;
  for (const auto& [label, idx] : members) {
    if (idx.size() < 2)
      fail(ErrorCode::DegenerateClass, "class " + std::string(label_name(label)) + " has " +
                                           std::to_string(idx.size()) + " sample(s)");
    const auto n = static_cast<double>(idx.size());
    Vector mu(d, 0.0);
    for (auto i : idx)
      for (std::size_t j = 0; j < d; ++j) mu[j] += x(i, j);
    for (auto& v : mu) v /= n;
    Vector var(d, 0.0);
    for (auto i : idx)
      for (std::size_t j = 0; j < d; ++j) var[j] += (x(i, j) - mu[j]) * (x(i, j) - mu[j]);
    for (auto& v : var) {
      v /= n;
      largest = std::max(largest, v);
    }
    m.classes.push_back(label);
    m.means.push_back(std::move(mu));
    m.variances.push_back(std::move(var));
    m.priors.push_back(n / static_cast<double>(x.rows()));
  }
  m.variance_floor = largest > 0.0 ? 1e-9 * largest : 1e-9;
  for (auto& var : m.variances)
    for (auto& v : var) v = std::max(v, m.variance_floor);
  return m;
}

/// Per-class log p(e | c) + log p(c), in model class order.
inline Vector gnb_log_joint(const GaussianNbModel& m, std::span<const double> e) {
  if (e.size() != m.dim())
    fail(ErrorCode::DimMismatch, "query has " + std::to_string(e.size()) + " dims, model " +
                                     std::to_string(m.dim()));
  constexpr double kLog2Pi = 1.8378770664093454835606594728112;  // ln(2*pi)
  Vector out(m.classes.size());
  for (std::size_t c = 0; c < m.classes.size(); ++c) {
    double lp = std::log(m.priors[c]);
    for (std::size_t j = 0; j < e.size(); ++j) {
      const double diff = e[j] - m.means[c][j];
      lp -= 0.5 * (kLog2Pi + std::log(m.variances[c][j]) + diff * diff / m.variances[c][j]);
    }
    out[c] = lp;
  }
  return out;
}

/// Posterior over the five labels (zero for classes absent from training),
/// normalized in log space after subtracting the largest joint.
inline Prediction gnb_predict(const GaussianNbModel& m, std::span<const double> e) {
  const Vector lj = gnb_log_joint(m, e);
  const double top = *std::max_element(lj.begin(), lj.end());
  double z = 0.0;
  for (double v : lj) z += std::exp(v - top);
  Prediction out;
  out.scores.kind = ScoreKind::Posterior;
  for (std::size_t c = 0; c < m.classes.size(); ++c)
    out.scores[m.classes[c]] = std::exp(lj[c] - top) / z;
  out.label = out.scores.argmax();
  return out;
}

inline void save_gnb(const std::filesystem::path& path, const GaussianNbModel& m) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  out << "stutterkit-gnb,1\n";
  out << "variance_floor," << csv::num(m.variance_floor) << '\n';
  for (std::size_t c = 0; c < m.classes.size(); ++c) {
    const auto name = label_name(m.classes[c]);
    out << "prior," << name << ',' << csv::num(m.priors[c]) << '\n';
    out << "mean," << name;
    for (double v : m.means[c]) out << ',' << csv::num(v);
    out << "\nvariance," << name;
    for (double v : m.variances[c]) out << ',' << csv::num(v);
    out << '\n';
  }
}

inline GaussianNbModel load_gnb(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  const std::string src = path.string();
  GaussianNbModel m;
  std::map<Label, std::size_t> slot;
  auto slot_of = [&](const std::string& name) {
    auto l = parse_label(name);
    if (!l) fail(ErrorCode::UnknownLabel, src + ": '" + name + "'");
    auto [it, inserted] = slot.try_emplace(*l, m.classes.size());
    if (inserted) {
      m.classes.push_back(*l);
      m.priors.push_back(0.0);
      m.means.emplace_back();
      m.variances.emplace_back();
    }
    return it->second;
  };
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = csv::split_line(line);
    if (f[0] == "stutterkit-gnb") {
      header = true;
    } else if (f[0] == "variance_floor" && f.size() == 2) {
      m.variance_floor = csv::to_double(f[1], src);
    } else if ((f[0] == "prior" || f[0] == "mean" || f[0] == "variance") && f.size() >= 3) {
      const auto c = slot_of(f[1]);
      if (f[0] == "prior") {
        m.priors[c] = csv::to_double(f[2], src);
      } else {
        Vector v;
        for (std::size_t i = 2; i < f.size(); ++i) v.push_back(csv::to_double(f[i], src));
        (f[0] == "mean" ? m.means[c] : m.variances[c]) = std::move(v);
      }
    } else {
      fail(ErrorCode::Malformed, src + ": unexpected record '" + f[0] + "'");
    }
  }
  if (!header) fail(ErrorCode::Malformed, src + " is not a naive-Bayes model file");
  return m;
}

}  // namespace stutterkit
