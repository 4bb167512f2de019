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

#include "stutterkit/features.hpp"
#include "test_support.hpp"

namespace stutterkit {
namespace {

TEST(StatPool, TwoRows) {
  EXPECT_EQ(stat_pool(Matrix{{1, 2}, {3, 4}}).values, (Vector{2, 3, 1, 1}));
}

TEST(StatPool, ConstantRowsHaveZeroStd) {
  EXPECT_EQ(stat_pool(Matrix{{5, 5}, {5, 5}, {5, 5}}).values, (Vector{5, 5, 0, 0}));
}

TEST(StatPool, SingleFrameHasZeroStd) {
  EXPECT_EQ(stat_pool(Matrix{{1.5, -2}}).values, (Vector{1.5, -2, 0, 0}));
}

TEST(StatPool, EmptyInputIsAnError) {
  try {
    stat_pool(Matrix(0, 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyInput);
  }
}

TEST(StatPool, MatchesIndependentTwoPassComputation) {
  SeededRng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix m = testing::random_matrix(7, 3, rng, 3.0);
    const auto pooled = stat_pool(m);
    for (std::size_t j = 0; j < 3; ++j) {
      long double mean = 0;
      for (std::size_t i = 0; i < 7; ++i) mean += m(i, j);
      mean /= 7;
      long double var = 0;
      for (std::size_t i = 0; i < 7; ++i) var += (m(i, j) - mean) * (m(i, j) - mean);
      const double sd = static_cast<double>(std::sqrt(var / 7));
      EXPECT_NEAR(pooled.values[j], static_cast<double>(mean), 1e-12);
      EXPECT_NEAR(pooled.values[3 + j], sd, 1e-12);
    }
  }
}

TEST(StatPool, RowPermutationInvariant) {
  SeededRng rng(22);
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix m = testing::random_matrix(9, 4, rng, 1e3);
    std::vector<std::size_t> order(9);
    for (std::size_t i = 0; i < 9; ++i) order[i] = i;
    rng.shuffle(order);
    Matrix p(9, 4);
    for (std::size_t i = 0; i < 9; ++i)
      for (std::size_t j = 0; j < 4; ++j) p(i, j) = m(order[i], j);
    EXPECT_EQ(stat_pool(m).values, stat_pool(p).values);
  }
}

TEST(Concat, FollowsInputOrder) {
  const std::vector<PooledVector> parts = {{{1, 2}, "a"}, {{3, 4, 5}, "b"}};
  const auto c = concat_embeddings(parts);
  EXPECT_EQ(c.values, (Vector{1, 2, 3, 4, 5}));
  EXPECT_EQ(c.source_tag, "a+b");
}

TEST(Concat, ThreeLdaOutputsMakeTwelve) {
  const std::vector<PooledVector> parts(3, PooledVector{{1, 2, 3, 4}, "lda"});
  EXPECT_EQ(concat_embeddings(parts).dim(), 12u);
}

TEST(Concat, SingleAndEmpty) {
  const std::vector<PooledVector> one = {{{7, 8}, "x"}};
  EXPECT_EQ(concat_embeddings(one), one[0]);
  EXPECT_THROW(concat_embeddings(std::vector<PooledVector>{}), Error);
}

TEST(Concat, SliceRecoversParts) {
  SeededRng rng(4);
  std::vector<PooledVector> parts;
  for (std::size_t d : {3u, 1u, 6u}) {
    PooledVector p;
    for (std::size_t i = 0; i < d; ++i) p.values.push_back(rng.normal());
    parts.push_back(p);
  }
  const auto c = concat_embeddings(parts);
  std::size_t at = 0;
  for (const auto& p : parts) {
    EXPECT_EQ(Vector(c.values.begin() + static_cast<long>(at), c.values.begin() + static_cast<long>(at + p.dim())), p.values);
    at += p.dim();
  }
}

TEST(L2Normalize, Basics) {
  const auto v = l2_normalize({{3, 4}, "x"});
  EXPECT_DOUBLE_EQ(v.values[0], 0.6);
  EXPECT_DOUBLE_EQ(v.values[1], 0.8);
  EXPECT_EQ(l2_normalize({{0, 1, 0}, "u"}).values, (Vector{0, 1, 0}));
  try {
    l2_normalize({{0, 0}, "z"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroVector);
  }
}

TEST(L2Normalize, UnitNormForRandomVectors) {
  SeededRng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    PooledVector v;
    for (int i = 0; i < 50; ++i) v.values.push_back(rng.normal() * 1e3);
    double n = 0;
    for (double x : l2_normalize(v).values) n += x * x;
    EXPECT_NEAR(std::sqrt(n), 1.0, 1e-12);
  }
}

}  // namespace
}  // namespace stutterkit
