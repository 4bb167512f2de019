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


// Fisher LDA used as a supervised projection to at most C-1 dimensions.

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "stutterkit/csv.hpp"
#include "stutterkit/error.hpp"
#include "stutterkit/labels.hpp"
#include "stutterkit/numerics.hpp"

namespace stutterkit {

struct LdaModel {
  Vector global_mean;          // D
  Matrix projection;           // D x k, columns by descending discriminant ratio
  Vector discriminant_ratios;  // k eigenvalues of the whitened between-class scatter
  std::vector<Label> class_labels;
  double regularization = 1e-6;

  std::size_t input_dim() const noexcept { return global_mean.size(); }
  std::size_t components() const noexcept { return projection.cols(); }

  friend bool operator==(const LdaModel&, const LdaModel&) = default;
};

struct ScatterMatrices {
  Matrix within;   // pooled, unregularized
  Matrix between;  // sum_c n_c (mu_c - mu)(mu_c - mu)^T
  Vector global_mean;
  std::vector<Label> classes;
};

inline ScatterMatrices scatter_matrices(const Matrix& x, std::span<const Label> y) {
  if (x.rows() != y.size()) fail(ErrorCode::ShapeMismatch, "labels and rows differ in count");
  const std::size_t d = x.cols();
  std::map<Label, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < y.size(); ++i) members[y[i]].push_back(i);

  ScatterMatrices s;
  s.global_mean = mean_rows(x);
  s.within = Matrix(d, d);
  s.between = Matrix(d, d);
  Matrix centered(x.rows(), d);
  for (const auto& [label, idx] : members) {
    s.classes.push_back(label);
    Vector mu(d, 0.0);
    for (auto i : idx)
      for (std::size_t j = 0; j < d; ++j) mu[j] += x(i, j);
    for (auto& v : mu) v /= static_cast<double>(idx.size());
    for (auto i : idx)
      for (std::size_t j = 0; j < d; ++j) centered(i, j) = x(i, j) - mu[j];
    const auto n_c = static_cast<double>(idx.size());
    for (std::size_t a = 0; a < d; ++a) {
      const double da = mu[a] - s.global_mean[a];
      for (std::size_t b = 0; b < d; ++b) s.between(a, b) += n_c * da * (mu[b] - s.global_mean[b]);
    }
  }
  s.within = matmul(transpose(centered), centered);
  return s;
}

inline void symmetrize(Matrix& m) {
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = i + 1; j < m.cols(); ++j) {
      const double v = 0.5 * (m(i, j) + m(j, i));
      m(i, j) = v;
      m(j, i) = v;
    }
}

/// Fits the projection from training data only.
///
/// S_w gains epsilon * trace(S_w) / D on its diagonal. The basis is the
/// top-k eigenvectors of W S_b W with W = S_w^{-1/2}, mapped back through W,
/// so each column v satisfies S_b v = lambda S_w v. Each column is signed so
/// its largest-magnitude entry is positive.
inline LdaModel lda_fit(const Matrix& x, std::span<const Label> y, std::size_t components,
                        double epsilon = 1e-6) {
  if (x.rows() != y.size()) fail(ErrorCode::ShapeMismatch, "labels and rows differ in count");
  std::map<Label, std::size_t> class_sizes;
  for (auto l : y) ++class_sizes[l];
  const std::size_t n_classes = class_sizes.size();
  for (const auto& [label, n] : class_sizes)
    if (n < 2)
      fail(ErrorCode::DegenerateClass, "class " + std::string(label_name(label)) + " has " +
                                           std::to_string(n) + " sample(s)");
  if (components == 0 || components + 1 > n_classes)
    fail(ErrorCode::TooManyComponents, std::to_string(components) + " components with " +
                                           std::to_string(n_classes) + " classes");
  if (x.rows() <= n_classes) fail(ErrorCode::DegenerateClass, "need more samples than classes");
  if (!x.all_finite()) fail(ErrorCode::NonFinitePayload, "non-finite training features");

  const std::size_t d = x.cols();
  auto s = scatter_matrices(x, y);
  const double ridge = epsilon * trace(s.within) / static_cast<double>(d);
  for (std::size_t i = 0; i < d; ++i) s.within(i, i) += ridge;

  const auto w_eig = sym_eig(s.within);
  if (w_eig.values.back() <= 0.0)
    fail(ErrorCode::RankDeficient, "within-class scatter is not positive definite");

  // W = V diag(lambda^-1/2) V^T
  Matrix scaled = w_eig.vectors;
  for (std::size_t j = 0; j < d; ++j) {
    const double f = 1.0 / std::sqrt(w_eig.values[j]);
    for (std::size_t i = 0; i < d; ++i) scaled(i, j) *= f;
  }
  Matrix whiten = matmul(scaled, transpose(w_eig.vectors));
  symmetrize(whiten);

  Matrix m = matmul(matmul(whiten, s.between), whiten);
  symmetrize(m);
  const auto b_eig = sym_eig(m);

  Matrix top(d, components);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < components; ++j) top(i, j) = b_eig.vectors(i, j);

  LdaModel model;
  model.global_mean = s.global_mean;
  model.projection = matmul(whiten, top);
  model.discriminant_ratios.assign(b_eig.values.begin(), b_eig.values.begin() + components);
  model.class_labels = s.classes;
  model.regularization = epsilon;

  for (std::size_t j = 0; j < components; ++j) {
    std::size_t arg = 0;
    for (std::size_t i = 1; i < d; ++i)
      if (std::abs(model.projection(i, j)) > std::abs(model.projection(arg, j))) arg = i;
    if (model.projection(arg, j) < 0.0)
      for (std::size_t i = 0; i < d; ++i) model.projection(i, j) = -model.projection(i, j);
  }
  if (!model.projection.all_finite()) fail(ErrorCode::RankDeficient, "non-finite projection");
  return model;
}

inline Matrix lda_transform(const LdaModel& model, const Matrix& x) {
  if (x.cols() != model.input_dim())
    fail(ErrorCode::DimMismatch, "LDA expects " + std::to_string(model.input_dim()) +
                                     " features, got " + std::to_string(x.cols()));
  return matmul(center_rows(x, model.global_mean), model.projection);
}

inline Vector lda_transform(const LdaModel& model, std::span<const double> x) {
  Matrix one(1, x.size(), Vector(x.begin(), x.end()));
  return lda_transform(model, one).row_vector(0);
}

inline void save_lda(const std::filesystem::path& path, const LdaModel& model) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  out << "stutterkit-lda,1\n";
  out << "regularization," << csv::num(model.regularization) << '\n';
  out << "classes";
  for (auto l : model.class_labels) out << ',' << label_name(l);
  out << "\ndims," << model.input_dim() << ',' << model.components() << '\n';
  out << "mean";
  for (double v : model.global_mean) out << ',' << csv::num(v);
  out << "\nratios";
  for (double v : model.discriminant_ratios) out << ',' << csv::num(v);
  out << '\n';
  for (std::size_t i = 0; i < model.projection.rows(); ++i) {
    out << "proj";
    for (double v : model.projection.row(i)) out << ',' << csv::num(v);
    out << '\n';
  }
}

inline LdaModel load_lda(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  LdaModel model;
  std::string line;
  std::size_t d = 0;
  std::size_t k = 0;
  std::vector<Vector> proj_rows;
  bool header = false;
  const std::string src = path.string();
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = csv::split_line(line);
    auto numbers = [&](std::size_t from) {
      Vector v;
      for (std::size_t i = from; i < f.size(); ++i) v.push_back(csv::to_double(f[i], src));
      return v;
    };
    if (f[0] == "stutterkit-lda") {
      header = true;
    } else if (f[0] == "regularization" && f.size() == 2) {
      model.regularization = csv::to_double(f[1], src);
    } else if (f[0] == "classes") {
      for (std::size_t i = 1; i < f.size(); ++i) {
        auto l = parse_label(f[i]);
        if (!l) fail(ErrorCode::UnknownLabel, src + ": '" + f[i] + "'");
        model.class_labels.push_back(*l);
      }
    } else if (f[0] == "dims" && f.size() == 3) {
      d = static_cast<std::size_t>(csv::to_double(f[1], src));
      k = static_cast<std::size_t>(csv::to_double(f[2], src));
    } else if (f[0] == "mean") {
      model.global_mean = numbers(1);
    } else if (f[0] == "ratios") {
      model.discriminant_ratios = numbers(1);
    } else if (f[0] == "proj") {
      proj_rows.push_back(numbers(1));
    } else {
      fail(ErrorCode::Malformed, src + ": unexpected record '" + f[0] + "'");
    }
  }
  if (!header) fail(ErrorCode::Malformed, src + " is not an LDA model file");
  if (model.global_mean.size() != d || proj_rows.size() != d)
    fail(ErrorCode::Malformed, src + ": dimensions disagree with the dims record");
  model.projection = Matrix::from_rows(proj_rows);
  if (model.projection.cols() != k) fail(ErrorCode::Malformed, src + ": projection width != k");
  return model;
}

}  // namespace stutterkit
