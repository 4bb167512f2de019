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
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace stutterkit {

/// The five stuttering/fluent annotations, in reporting order.
enum class Label : int { R = 0, P = 1, B = 2, I = 3, F = 4 };

inline constexpr std::size_t kNumClasses = 5;
inline constexpr std::array<Label, kNumClasses> kAllLabels = {Label::R, Label::P, Label::B,
                                                              Label::I, Label::F};

inline constexpr std::size_t index_of(Label l) { return static_cast<std::size_t>(l); }
inline constexpr Label label_at(std::size_t i) { return static_cast<Label>(i); }

inline std::string_view label_name(Label l) {
  static constexpr std::array<std::string_view, kNumClasses> names = {"R", "P", "B", "I", "F"};
  return names[index_of(l)];
}

/// Accepts the single-letter codes and the long names. Non-stuttering
/// annotations (NoSpeech, Music, ...) are not labels.
inline std::optional<Label> parse_label(std::string_view s) {
  if (s == "R" || s == "Repetition" || s == "WordRep" || s == "SoundRep") return Label::R;
  if (s == "P" || s == "Prolongation") return Label::P;
  if (s == "B" || s == "Block") return Label::B;
  if (s == "I" || s == "Interjection") return Label::I;
  if (s == "F" || s == "Fluent" || s == "NoStutteredWords") return Label::F;
  return std::nullopt;
}

}  // namespace stutterkit
