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


#pragma once

#include <array>
#include <cmath>
#include <cstddef>

#include "stutterkit/labels.hpp"

namespace stutterkit {

enum class ScoreKind { Posterior, VoteFraction };

/// Per-class scores in label order (R, P, B, I, F).
struct ScoreVector {
  std::array<double, kNumClasses> scores{};
  ScoreKind kind = ScoreKind::Posterior;

  double operator[](Label l) const { return scores[index_of(l)]; }
  double& operator[](Label l) { return scores[index_of(l)]; }

  double sum() const {
    double s = 0.0;
    for (double v : scores) s += v;
    return s;
  }

  /// Highest score; equal scores resolve to the earlier label.
  Label argmax() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < kNumClasses; ++i)
      if (scores[i] > scores[best]) best = i;
    return label_at(best);
  }

  friend bool operator==(const ScoreVector&, const ScoreVector&) = default;
};

struct Prediction {
  Label label = Label::F;
  ScoreVector scores;
};

}  // namespace stutterkit
