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


#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <cmath>

#include "stutterkit/lda.hpp"
#include "oracles.hpp"

namespace stutterkit {
namespace {

double fisher_trace_ratio(const Matrix& projected, const std::vector<Label>& y) {
  const auto [sw, sb] = oracles::scatter(projected, y);
  return sb.trace() / sw.trace();
}

testing::LabeledMatrix random_five_class(SeededRng& rng, std::size_t n, std::size_t d) {
  // Random class means and a random shared linear mixing, so the problem is
  // not aligned with the coordinate axes.
  const Matrix mix = testing::random_matrix(d, d, rng);
  std::vector<Vector> means;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    Vector m(d);
    for (auto& v : m) v = 2.0 * rng.normal();
    means.push_back(m);
  }
  testing::LabeledMatrix out{Matrix(n, d), {}};
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % kNumClasses;
    Vector z(d);
    for (auto& v : z) v = rng.normal();
    for (std::size_t j = 0; j < d; ++j) {
      double s = means[c][j];
      for (std::size_t k = 0; k < d; ++k) s += mix(j, k) * z[k];
      out.x(i, j) = s;
    }
    out.y.push_back(label_at(c));
  }
  return out;
}

TEST(Lda, SymmetricTwoClassProblemPicksSeparatingAxis) {
  SeededRng rng(1);
  Matrix x(400, 2);
  std::vector<Label> y;
  // Each right-hand sample mirrors a left-hand one, so the pooled scatter
  // has no x-y coupling and the symmetry holds exactly, not just on average.
  for (std::size_t i = 0; i < 200; ++i) {
    const double a = rng.normal(), b = rng.normal();
    x(i, 0) = -5.0 + a;
    x(i, 1) = b;
    x(200 + i, 0) = 5.0 - a;
    x(200 + i, 1) = b;
  }
  y.assign(200, Label::R);
  y.resize(400, Label::F);
  const auto model = lda_fit(x, y, 1);
  const double a = model.projection(0, 0), b = model.projection(1, 0);
  const double angle = std::atan2(std::abs(b), std::abs(a));
  EXPECT_LT(angle, 1e-2);
  EXPECT_GT(a, 0.0);  // sign convention
}

TEST(Lda, MatchesExplicitInverseGeneralizedEigensolve) {
  SeededRng rng(2);
  for (int trial = 0; trial < 5; ++trial) {
    const auto data = random_five_class(rng, 500, 10);
    const double eps = 1e-6;
    const auto model = lda_fit(data.x, data.y, 4, eps);
    ASSERT_EQ(model.projection.rows(), 10u);
    ASSERT_EQ(model.projection.cols(), 4u);

    const auto ref = oracles::lda_generalized_eigen(data.x, data.y, eps);
    for (std::size_t j = 0; j < 4; ++j) {
      EXPECT_GE(oracles::column_cosine(model.projection, j, ref.vectors[j]), 1.0 - 1e-6)
          << "trial " << trial << " column " << j;
      EXPECT_NEAR(model.discriminant_ratios[j], ref.values[j], 1e-8 * std::max(1.0, ref.values[0]));
    }
  }
}

TEST(Lda, ColumnsAreSignedByLargestEntry) {
  SeededRng rng(3);
  const auto data = random_five_class(rng, 300, 8);
  const auto model = lda_fit(data.x, data.y, 4);
  for (std::size_t j = 0; j < 4; ++j) {
    std::size_t arg = 0;
    for (std::size_t i = 1; i < 8; ++i)
      if (std::abs(model.projection(i, j)) > std::abs(model.projection(arg, j))) arg = i;
    EXPECT_GT(model.projection(arg, j), 0.0);
  }
}

TEST(Lda, Errors) {
  SeededRng rng(4);
  const auto data = random_five_class(rng, 100, 6);
  auto code = [&](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Io;
  };
  EXPECT_EQ(code([&] { lda_fit(data.x, data.y, 5); }), ErrorCode::TooManyComponents);
  EXPECT_EQ(code([&] { lda_fit(data.x, data.y, 0); }), ErrorCode::TooManyComponents);
  auto y = data.y;
  for (auto& l : y)
    if (l == Label::P) l = Label::R;
  y[1] = Label::P;
  EXPECT_EQ(code([&] { lda_fit(data.x, y, 3); }), ErrorCode::DegenerateClass);
  const auto model = lda_fit(data.x, data.y, 4);
  EXPECT_EQ(code([&] { lda_transform(model, Matrix(3, 5)); }), ErrorCode::DimMismatch);
  // A constant feature matrix has zero within-class scatter even with the ridge.
  EXPECT_EQ(code([&] { lda_fit(Matrix(100, 6, 1.0), data.y, 2); }), ErrorCode::RankDeficient);
}

TEST(Lda, TransformOfGlobalMeanIsZero) {
  SeededRng rng(5);
  const auto data = random_five_class(rng, 200, 7);
  const auto model = lda_fit(data.x, data.y, 4);
  Matrix means(6, 7);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 7; ++j) means(i, j) = model.global_mean[j];
  const auto t = lda_transform(model, means);
  ASSERT_EQ(t.rows(), 6u);
  ASSERT_EQ(t.cols(), 4u);
  for (double v : t.data()) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(Lda, TransformIsAffine) {
  SeededRng rng(6);
  const auto data = random_five_class(rng, 200, 7);
  const auto model = lda_fit(data.x, data.y, 4);
  const Vector a = data.x.row_vector(3), b = data.x.row_vector(77);
  Vector mix(7);
  for (std::size_t j = 0; j < 7; ++j) mix[j] = 0.3 * a[j] + 0.7 * b[j];
  const auto ta = lda_transform(model, std::span<const double>(a));
  const auto tb = lda_transform(model, std::span<const double>(b));
  const auto tm = lda_transform(model, std::span<const double>(mix));
  for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(tm[k], 0.3 * ta[k] + 0.7 * tb[k], 1e-10);
}

TEST(Lda, FisherRatioBeatsRandomProjections) {
  SeededRng rng(7);
  const auto data = random_five_class(rng, 500, 10);
  const auto model = lda_fit(data.x, data.y, 4);
  const double lda_ratio = fisher_trace_ratio(lda_transform(model, data.x), data.y);
  SeededRng proj_rng(70);
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix p = testing::random_matrix(10, 4, proj_rng);
    const double r = fisher_trace_ratio(matmul(data.x, p), data.y);
    EXPECT_GE(lda_ratio, r) << "random projection " << trial;
  }
}

TEST(Lda, DeterministicFit) {
  SeededRng rng(8);
  const auto data = random_five_class(rng, 300, 9);
  EXPECT_EQ(lda_fit(data.x, data.y, 4), lda_fit(data.x, data.y, 4));
}

TEST(Lda, SaveLoadRoundTripIsExact) {
  SeededRng rng(9);
  const auto data = random_five_class(rng, 300, 9);
  const auto model = lda_fit(data.x, data.y, 3);
  const auto dir = testing::fresh_dir("lda_io");
  save_lda(dir / "lda.csv", model);
  const auto loaded = load_lda(dir / "lda.csv");
  EXPECT_EQ(loaded, model);
  EXPECT_EQ(lda_transform(loaded, data.x), lda_transform(model, data.x));
}

TEST(Lda, WideInputFitsQuickly) {
  // Pooled inputs are wide; make sure a moderately wide fit stays tractable.
  SeededRng rng(10);
  const auto data = random_five_class(rng, 600, 60);
  const auto t0 = std::chrono::steady_clock::now();
  const auto model = lda_fit(data.x, data.y, 4);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_EQ(model.components(), 4u);
  EXPECT_LT(secs, 5.0);
}

}  // namespace
}  // namespace stutterkit
