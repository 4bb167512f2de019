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

#include <stdexcept>
#include <string>
#include <string_view>

namespace stutterkit {

enum class ErrorCode {
  // numerics
  ShapeMismatch,
  NonSymmetric,
  NoConvergence,
  // dataset-io
  BadMagic,
  UnsupportedDtype,
  NonFinitePayload,
  UnknownLabel,
  DuplicateClipId,
  MissingColumn,
  MissingEmbedding,
  InconsistentClip,
  UnknownSourceTag,
  Io,
  Malformed,
  // features
  EmptyInput,
  EmptyList,
  ZeroVector,
  // lda / classifiers
  DegenerateClass,
  RankDeficient,
  TooManyComponents,
  DimMismatch,
  UnfittedBatchNorm,
  UnfittedModel,
  NonFiniteLoss,
  EmptySet,
  // fusion / evaluation
  KindMismatch,
  LengthMismatch,
  EmptyMatrix,
  CountMismatch,
  // configuration
  BadConfig,
};

/// Coarse failure class; the CLI maps these onto exit codes.
enum class ErrorClass { Usage, Data, Numeric };

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonSymmetric: return "NonSymmetric";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedDtype: return "UnsupportedDtype";
    case ErrorCode::NonFinitePayload: return "NonFinitePayload";
    case ErrorCode::UnknownLabel: return "UnknownLabel";
    case ErrorCode::DuplicateClipId: return "DuplicateClipId";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::MissingEmbedding: return "MissingEmbedding";
    case ErrorCode::InconsistentClip: return "InconsistentClip";
    case ErrorCode::UnknownSourceTag: return "UnknownSourceTag";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Malformed: return "Malformed";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::EmptyList: return "EmptyList";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::DegenerateClass: return "DegenerateClass";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::TooManyComponents: return "TooManyComponents";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::UnfittedBatchNorm: return "UnfittedBatchNorm";
    case ErrorCode::UnfittedModel: return "UnfittedModel";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::EmptySet: return "EmptySet";
    case ErrorCode::KindMismatch: return "KindMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyMatrix: return "EmptyMatrix";
    case ErrorCode::CountMismatch: return "CountMismatch";
    case ErrorCode::BadConfig: return "BadConfig";
  }
  return "Unknown";
}

inline ErrorClass error_class(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonSymmetric:
    case ErrorCode::NoConvergence:
    case ErrorCode::RankDeficient:
    case ErrorCode::NonFiniteLoss:
    case ErrorCode::ZeroVector:
      return ErrorClass::Numeric;
    case ErrorCode::BadConfig:
      return ErrorClass::Usage;
    default:
      return ErrorClass::Data;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        message_(message) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace stutterkit
