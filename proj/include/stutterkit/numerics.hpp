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


// Dense row-major matrices, a cyclic Jacobi eigensolver for symmetric
// matrices, and a seeded random stream. Everything here is float64.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stutterkit/error.hpp"

namespace stutterkit {

using Vector = std::vector<double>;

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      fail(ErrorCode::ShapeMismatch, "payload of " + std::to_string(data_.size()) +
                                         " values for a " + std::to_string(rows_) + "x" +
                                         std::to_string(cols_) + " matrix");
    }
  }
  Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) fail(ErrorCode::ShapeMismatch, "ragged initializer");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static Matrix from_rows(const std::vector<Vector>& rows) {
    if (rows.empty()) return {};
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != m.cols()) fail(ErrorCode::ShapeMismatch, "ragged row list");
      std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
    }
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  Vector row_vector(std::size_t r) const {
    auto s = row(r);
    return {s.begin(), s.end()};
  }
  Vector col_vector(std::size_t c) const {
    Vector v(rows_);
    for (std::size_t r = 0; r < rows_; ++r) v[r] = (*this)(r, c);
    return v;
  }

  const std::vector<double>& data() const noexcept { return data_; }
  std::vector<double>& data() noexcept { return data_; }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    fail(ErrorCode::ShapeMismatch, "matmul of " + std::to_string(a.rows()) + "x" +
                                       std::to_string(a.cols()) + " by " +
                                       std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out[j] += aik * brow[j];
    }
  }
  return c;
}

inline Vector mean_rows(const Matrix& m) {
  if (m.rows() == 0) fail(ErrorCode::ShapeMismatch, "mean of an empty matrix");
  Vector mean(m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    for (std::size_t j = 0; j < m.cols(); ++j) mean[j] += r[j];
  }
  for (auto& x : mean) x /= static_cast<double>(m.rows());
  return mean;
}

/// Subtracts `center` from every row.
inline Matrix center_rows(const Matrix& m, std::span<const double> center) {
  if (center.size() != m.cols()) fail(ErrorCode::ShapeMismatch, "center length != cols");
  Matrix out = m;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < m.cols(); ++j) r[j] -= center[j];
  }
  return out;
}

inline Matrix center_rows(const Matrix& m) { return center_rows(m, mean_rows(m)); }

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) fail(ErrorCode::ShapeMismatch, "dot of unequal lengths");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double trace(const Matrix& m) {
  double t = 0.0;
  for (std::size_t i = 0; i < std::min(m.rows(), m.cols()); ++i) t += m(i, i);
  return t;
}

struct SymEigResult {
  Vector values;   // descending
  Matrix vectors;  // column i pairs with values[i]
};

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Throws NonSymmetric when |m(i,j) - m(j,i)| exceeds 1e-10 of the largest
/// entry, and NoConvergence after 100*n sweeps. Eigenvalues equal within
/// 1e-12 (relative to the spectrum scale) keep their rotation-output order.
inline SymEigResult sym_eig(const Matrix& m) {
  if (m.rows() != m.cols()) fail(ErrorCode::ShapeMismatch, "sym_eig needs a square matrix");
  const std::size_t n = m.rows();
  if (!m.all_finite()) fail(ErrorCode::NonSymmetric, "non-finite entries");

  double scale = 0.0;
  for (double x : m.data()) scale = std::max(scale, std::abs(x));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(m(i, j) - m(j, i)) > 1e-10 * scale)
        fail(ErrorCode::NonSymmetric, "entry (" + std::to_string(i) + "," + std::to_string(j) +
                                          ") differs from its transpose");

  // Work on the symmetrized copy.
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) = 0.5 * (m(i, j) + m(j, i));
  Matrix v = Matrix::identity(n);
  double frob = 0.0;
  for (double x : a.data()) frob += x * x;
  // Below this an off-diagonal entry no longer moves any residual we check.
  const double floor_abs = 1e-18 * std::sqrt(frob);

  const std::size_t max_sweeps = std::max<std::size_t>(100 * n, 1);
  bool converged = n <= 1;
  for (std::size_t sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    bool any_nonzero = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double app = a(p, p);
        const double aqq = a(q, q);
        const double g = 100.0 * std::abs(apq);
        // Negligible against both diagonal entries: drop it.
        if ((std::abs(app) + g == std::abs(app) && std::abs(aqq) + g == std::abs(aqq)) ||
            std::abs(apq) < floor_abs) {
          a(p, q) = 0.0;
          a(q, p) = 0.0;
          continue;
        }
        any_nonzero = true;
        const double h = aqq - app;
        double t;
        if (std::abs(h) + g == std::abs(h)) {
          t = apq / h;
        } else {
          const double theta = 0.5 * h / apq;
          t = 1.0 / (std::abs(theta) + std::sqrt(1.0 + theta * theta));
          if (theta < 0.0) t = -t;
        }
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        const double tau = s / (1.0 + c);

        a(p, p) = app - t * apq;
        a(q, q) = aqq + t * apq;
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
          if (r == p || r == q) continue;
          const double arp = a(r, p);
          const double arq = a(r, q);
          const double new_rp = arp - s * (arq + arp * tau);
          const double new_rq = arq + s * (arp - arq * tau);
          a(r, p) = new_rp;
          a(p, r) = new_rp;
          a(r, q) = new_rq;
          a(q, r) = new_rq;
        }
        for (std::size_t r = 0; r < n; ++r) {
          const double vrp = v(r, p);
          const double vrq = v(r, q);
          v(r, p) = vrp - s * (vrq + vrp * tau);
          v(r, q) = vrq + s * (vrp - vrq * tau);
        }
      }
    }
    if (!any_nonzero) {
      converged = true;
      for (std::size_t p = 0; p < n && converged; ++p)
        for (std::size_t q = p + 1; q < n; ++q)
          if (a(p, q) != 0.0) {
            converged = false;
            break;
          }
    }
  }
  if (!converged) fail(ErrorCode::NoConvergence, "Jacobi sweep cap reached");

  // Stable insertion sort, descending; near-equal values keep their order.
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  double spectrum = 1.0;
  for (std::size_t i = 0; i < n; ++i) spectrum = std::max(spectrum, std::abs(a(i, i)));
  const double tie = 1e-12 * spectrum;
  for (std::size_t i = 1; i < n; ++i) {
    const std::size_t cur = order[i];
    std::size_t j = i;
    while (j > 0 && a(cur, cur) > a(order[j - 1], order[j - 1]) + tie) {
      order[j] = order[j - 1];
      --j;
    }
    order[j] = cur;
  }

  SymEigResult out{Vector(n), Matrix(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a(order[k], order[k]);
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, k) = v(r, order[k]);
  }
  return out;
}

/// Deterministic random stream. Same seed, same draws.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n) {
    if (n == 0) return 0;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  /// Standard normal draw (Box-Muller, pairs cached).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  template <class T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_index(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace stutterkit
