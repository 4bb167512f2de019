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


// Independent reference computations shared by the unit tests and the
// acceptance runner. None of these call into the code they check beyond
// reading fitted parameters.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include "test_support.hpp"

namespace stutterkit::oracles {

using EMatrix = Eigen::MatrixXd;

inline EMatrix to_eigen(const Matrix& m) {
  EMatrix e(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) e(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m(i, j);
  return e;
}

/// Within / between scatter recomputed from scratch.
inline std::pair<EMatrix, EMatrix> scatter(const Matrix& xm, const std::vector<Label>& y) {
  const EMatrix x = to_eigen(xm);
  const Eigen::RowVectorXd mu = x.colwise().mean();
  EMatrix sw = EMatrix::Zero(x.cols(), x.cols());
  EMatrix sb = EMatrix::Zero(x.cols(), x.cols());
  for (Label l : kAllLabels) {
    std::vector<Eigen::Index> idx;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (y[i] == l) idx.push_back(static_cast<Eigen::Index>(i));
    if (idx.empty()) continue;
    EMatrix xc(static_cast<Eigen::Index>(idx.size()), x.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) xc.row(static_cast<Eigen::Index>(r)) = x.row(idx[r]);
    const Eigen::RowVectorXd mc = xc.colwise().mean();
    const EMatrix centered = xc.rowwise() - mc;
    sw += centered.transpose() * centered;
    sb += static_cast<double>(idx.size()) * (mc - mu).transpose() * (mc - mu);
  }
  return {sw, sb};
}

struct GeneralizedEigen {
  std::vector<double> values;           // descending
  std::vector<Eigen::VectorXd> vectors;
};

/// Solves S_b v = lambda S_w v by explicitly inverting the ridged S_w and
/// running a general (non-symmetric) eigensolver on S_w^-1 S_b.
inline GeneralizedEigen lda_generalized_eigen(const Matrix& x, const std::vector<Label>& y,
                                              double epsilon) {
  auto [sw, sb] = scatter(x, y);
  const auto d = sw.rows();
  sw += (epsilon * sw.trace() / static_cast<double>(d)) * EMatrix::Identity(d, d);
  Eigen::EigenSolver<EMatrix> es(EMatrix(sw.inverse() * sb));
  std::vector<std::pair<double, Eigen::VectorXd>> pairs;
  for (Eigen::Index i = 0; i < d; ++i)
    pairs.emplace_back(es.eigenvalues()[i].real(), es.eigenvectors().col(i).real());
  std::sort(pairs.begin(), pairs.end(), [](const auto& l, const auto& r) { return l.first > r.first; });
  GeneralizedEigen out;
  for (auto& [v, vec] : pairs) {
    out.values.push_back(v);
    out.vectors.push_back(vec);
  }
  return out;
}

/// |cos| between column j of `projection` and the reference vector.
inline double column_cosine(const Matrix& projection, std::size_t j, const Eigen::VectorXd& ref) {
  Eigen::VectorXd v(ref.size());
  for (Eigen::Index i = 0; i < ref.size(); ++i) v[i] = projection(static_cast<std::size_t>(i), j);
  return std::abs(v.dot(ref)) / (v.norm() * ref.norm());
}

/// KNN by scanning every point: stable order by (distance, index), first K
/// votes, ties by summed distance then label order.
inline Label knn_full_scan(const Matrix& pts, const std::vector<Label>& labels,
                           std::span<const double> q, std::size_t k, double p) {
  std::vector<std::size_t> idx(pts.rows());
  std::vector<double> d(pts.rows());
  for (std::size_t i = 0; i < pts.rows(); ++i) {
    idx[i] = i;
    double s = 0;
    for (std::size_t j = 0; j < q.size(); ++j) s += std::pow(std::abs(pts(i, j) - q[j]), p);
    d[i] = std::pow(s, 1.0 / p);
  }
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return d[a] < d[b]; });
  std::array<int, kNumClasses> votes{};
  std::array<double, kNumClasses> sums{};
  for (std::size_t r = 0; r < k; ++r) {
    votes[index_of(labels[idx[r]])]++;
    sums[index_of(labels[idx[r]])] += d[idx[r]];
  }
  std::size_t best = 0;
  for (std::size_t c = 1; c < kNumClasses; ++c)
    if (votes[c] > votes[best] || (votes[c] == votes[best] && sums[c] < sums[best])) best = c;
  return label_at(best);
}

/// Posterior from explicit normal densities times priors; no logarithms.
inline Vector gnb_direct_posterior(const GaussianNbModel& m, std::span<const double> e) {
  Vector joint(m.classes.size());
  double z = 0;
  for (std::size_t c = 0; c < m.classes.size(); ++c) {
    double p = m.priors[c];
    for (std::size_t j = 0; j < e.size(); ++j) {
      const double v = m.variances[c][j];
      const double diff = e[j] - m.means[c][j];
      p *= std::exp(-diff * diff / (2 * v)) / std::sqrt(2 * std::numbers::pi * v);
    }
    joint[c] = p;
    z += p;
  }
  for (auto& p : joint) p /= z;
  return joint;
}

/// Sample-by-sample cross-entropy loop over probability matrices.
inline mlp::Losses scalar_losses(const Matrix& pf, const Matrix& pd, const std::vector<Label>& y) {
  double lf = 0, ld = 0;
  int nd = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] == Label::F) {
      lf += -std::log(pf(i, 0));
    } else {
      lf += -std::log(pf(i, 1));
      ld += -std::log(pd(i, index_of(y[i])));
      ++nd;
    }
  }
  mlp::Losses l;
  l.fluent = lf / static_cast<double>(y.size());
  l.disfluent = nd ? ld / nd : 0.0;
  l.total = l.fluent + l.disfluent;
  return l;
}

struct GradientCheck {
  double max_relative_error = 0.0;
  std::size_t parameters = 0;
};

/// Central finite differences of L_tot for every parameter of both branches,
/// dropout masks held fixed, batch-norm in train mode.
inline GradientCheck gradient_check(std::size_t dim, std::size_t hidden, const Matrix& x,
                                    const std::vector<Label>& y, std::uint64_t seed,
                                    double step = 1e-5) {
  mlp::TrainingConfig cfg;
  cfg.hidden1 = cfg.hidden2 = hidden;
  cfg.seed = seed;
  auto model = mlp::make_model(dim, cfg);
  SeededRng rng(seed + 1);
  const auto mf = model.fluent.draw_masks(x.rows(), cfg.dropout, rng);
  const auto md = model.disfluent.draw_masks(x.rows(), cfg.dropout, rng);

  auto loss = [&] {
    const auto cf = model.fluent.forward_train(x, mf, cfg.bn_epsilon);
    const auto cd = model.disfluent.forward_train(x, md, cfg.bn_epsilon);
    return mlp::compute_loss_from_log_probs(cf.log_probs, cd.log_probs, y).total;
  };
  const auto cf = model.fluent.forward_train(x, mf, cfg.bn_epsilon);
  const auto cd = model.disfluent.forward_train(x, md, cfg.bn_epsilon);
  const auto [gf, gd] = mlp::loss_logit_gradients(cf.probs, cd.probs, y);
  const Vector analytic_f = model.fluent.backward(cf, gf);
  const Vector analytic_d = model.disfluent.backward(cd, gd);

  GradientCheck out;
  auto check = [&](Vector& params, const Vector& analytic) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double saved = params[i];
      params[i] = saved + step;
      const double up = loss();
      params[i] = saved - step;
      const double down = loss();
      params[i] = saved;
      const double numeric = (up - down) / (2 * step);
      const double denom = std::max({std::abs(numeric), std::abs(analytic[i]), 1e-6});
      out.max_relative_error = std::max(out.max_relative_error, std::abs(numeric - analytic[i]) / denom);
      ++out.parameters;
    }
  };
  check(model.fluent.params(), analytic_f);
  check(model.disfluent.params(), analytic_d);
  return out;
}

/// Monte-Carlo accuracy per class of the Bayes-optimal rule for isotropic
/// equal-prior Gaussians (nearest true mean), returned as UAR in percent.
inline double bayes_uar_nearest_mean(const std::vector<Vector>& means, double sigma,
                                     std::size_t samples, std::uint64_t seed) {
  SeededRng rng(seed);
  const std::size_t c_count = means.size();
  const std::size_t d = means.front().size();
  std::vector<std::size_t> correct(c_count, 0), total(c_count, 0);
  Vector e(d);
  for (std::size_t s = 0; s < samples; ++s) {
    const std::size_t c = s % c_count;
    for (std::size_t j = 0; j < d; ++j) e[j] = means[c][j] + sigma * rng.normal();
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < c_count; ++k) {
      double dist = 0;
      for (std::size_t j = 0; j < d; ++j) dist += (e[j] - means[k][j]) * (e[j] - means[k][j]);
      if (dist < best_d) {
        best_d = dist;
        best = k;
      }
    }
    ++total[c];
    correct[c] += best == c;
  }
  double uar = 0;
  for (std::size_t c = 0; c < c_count; ++c) uar += static_cast<double>(correct[c]) / static_cast<double>(total[c]);
  return 100.0 * uar / static_cast<double>(c_count);
}

}  // namespace stutterkit::oracles
