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

#include <cmath>

#include "stutterkit/numerics.hpp"
#include "test_support.hpp"

namespace stutterkit {
namespace {

double max_abs_diff(const Matrix& a, const Matrix& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) d = std::max(d, std::abs(a.data()[i] - b.data()[i]));
  return d;
}

TEST(Matrix, IdentityTimesAIsA) {
  SeededRng rng(1);
  const Matrix a = testing::random_matrix(4, 3, rng);
  EXPECT_EQ(matmul(Matrix::identity(4), a), a);
}

TEST(Matrix, MeanRows) {
  const Vector m = mean_rows(Matrix{{1, 2}, {3, 4}});
  EXPECT_EQ(m, (Vector{2, 3}));
}

TEST(Matrix, TransposeIsAnInvolution) {
  SeededRng rng(2);
  const Matrix a = testing::random_matrix(5, 2, rng);
  EXPECT_EQ(transpose(transpose(a)), a);
  EXPECT_EQ(transpose(a).rows(), 2u);
}

TEST(Matrix, CenterRowsRemovesTheMean) {
  SeededRng rng(3);
  const Matrix c = center_rows(testing::random_matrix(20, 3, rng));
  for (double v : mean_rows(c)) EXPECT_NEAR(v, 0.0, 1e-14);
}

TEST(Matrix, ShapeErrors) {
  EXPECT_THROW(matmul(Matrix(2, 3), Matrix(2, 3)), Error);
  EXPECT_THROW(Matrix(2, 2, Vector{1, 2, 3}), Error);
  EXPECT_THROW(center_rows(Matrix(2, 3), Vector{1, 2}), Error);
  try {
    matmul(Matrix(1, 2), Matrix(3, 1));
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
  }
}

TEST(SymEig, Identity) {
  const auto r = sym_eig(Matrix::identity(3));
  EXPECT_EQ(r.values, (Vector{1, 1, 1}));
  const Matrix vtv = matmul(transpose(r.vectors), r.vectors);
  EXPECT_LT(max_abs_diff(vtv, Matrix::identity(3)), 1e-14);
}

TEST(SymEig, TwoByTwo) {
  // Characteristic polynomial (2 - l)^2 - 1 = 0  =>  l = 3, 1.
  const auto r = sym_eig(Matrix{{2, 1}, {1, 2}});
  EXPECT_NEAR(r.values[0], 3.0, 1e-14);
  EXPECT_NEAR(r.values[1], 1.0, 1e-14);
  const double s = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(std::abs(r.vectors(0, 0)), s, 1e-14);
  EXPECT_NEAR(r.vectors(0, 0), r.vectors(1, 0), 1e-14);
  EXPECT_NEAR(r.vectors(0, 1), -r.vectors(1, 1), 1e-14);
}

TEST(SymEig, DiagonalIsSortedWithPermutedUnitVectors) {
  Matrix d(3, 3);
  d(0, 0) = 5;
  d(1, 1) = 2;
  d(2, 2) = 9;
  const auto r = sym_eig(d);
  EXPECT_EQ(r.values, (Vector{9, 5, 2}));
  EXPECT_EQ(r.vectors.col_vector(0), (Vector{0, 0, 1}));
  EXPECT_EQ(r.vectors.col_vector(1), (Vector{1, 0, 0}));
  EXPECT_EQ(r.vectors.col_vector(2), (Vector{0, 1, 0}));
}

TEST(SymEig, RejectsNonSymmetric) {
  try {
    sym_eig(Matrix{{1, 2}, {0, 1}});
    FAIL() << "expected NonSymmetric";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonSymmetric);
  }
  EXPECT_THROW(sym_eig(Matrix(2, 3)), Error);
}

TEST(SymEig, RandomReconstructionTraceAndResiduals) {
  SeededRng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix m = testing::random_symmetric(10, rng);
    const auto r = sym_eig(m);
    Matrix scaled = r.vectors;
    for (std::size_t i = 0; i < 10; ++i)
      for (std::size_t j = 0; j < 10; ++j) scaled(i, j) *= r.values[j];
    EXPECT_LT(max_abs_diff(matmul(scaled, transpose(r.vectors)), m), 1e-8);

    double sum = 0.0;
    for (double v : r.values) sum += v;
    EXPECT_NEAR(sum, trace(m), 1e-8 * std::max(1.0, std::abs(trace(m))));

    EXPECT_LT(max_abs_diff(matmul(transpose(r.vectors), r.vectors), Matrix::identity(10)), 1e-8);
    for (std::size_t j = 0; j < 10; ++j) {
      const Vector v = r.vectors.col_vector(j);
      const Matrix mv = matmul(m, Matrix(10, 1, v));
      double res = 0.0;
      for (std::size_t i = 0; i < 10; ++i) res = std::max(res, std::abs(mv(i, 0) - r.values[j] * v[i]));
      EXPECT_LT(res, 1e-8 * std::max(1.0, std::abs(r.values.front())));
    }
    for (std::size_t j = 1; j < 10; ++j) EXPECT_GE(r.values[j - 1], r.values[j]);
  }
}

TEST(SymEig, RankDeficientConverges) {
  SeededRng rng(5);
  const Matrix a = testing::random_matrix(30, 2, rng);
  const Matrix m = matmul(a, transpose(a));  // rank 2
  const auto r = sym_eig(m);
  EXPECT_GT(r.values[1], 0.0);
  for (std::size_t j = 2; j < 30; ++j) EXPECT_NEAR(r.values[j], 0.0, 1e-10 * r.values[0]);
}

TEST(SeededRng, EqualSeedsGiveEqualStreams) {
  SeededRng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 10000; ++i) {
    const auto x = a.next_u64();
    ASSERT_EQ(x, b.next_u64());
    differs |= x != c.next_u64();
  }
  EXPECT_TRUE(differs);
}

TEST(SeededRng, UniformRangeAndNormalMoments) {
  SeededRng rng(9);
  double sum = 0, sq = 0;
  constexpr int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    const double z = rng.normal();
    sum += z;
    sq += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sq / n, 1.0, 0.01);
}

}  // namespace
}  // namespace stutterkit
