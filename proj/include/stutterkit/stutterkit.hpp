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

#include "stutterkit/csv.hpp"
#include "stutterkit/dataset.hpp"
#include "stutterkit/error.hpp"
#include "stutterkit/feature_set.hpp"
#include "stutterkit/features.hpp"
#include "stutterkit/fusion.hpp"
#include "stutterkit/knn.hpp"
#include "stutterkit/labels.hpp"
#include "stutterkit/lda.hpp"
#include "stutterkit/metrics.hpp"
#include "stutterkit/mlp.hpp"
#include "stutterkit/naive_bayes.hpp"
#include "stutterkit/npy.hpp"
#include "stutterkit/numerics.hpp"
#include "stutterkit/pipeline.hpp"
#include "stutterkit/scores.hpp"
