// Copyright 2026 The melsvc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <string>

#include "melsvc/core/error.hpp"

namespace melsvc::melody {

/// Which parts of the melody pipeline are active.
struct AblationCondition {
  std::string name;
  bool fine_tune = false;
  bool weighted_sum = false;
  bool fft_blocks = false;

  bool operator==(const AblationCondition&) const = default;
};

/// The seven named configurations, in table order.
inline const std::array<AblationCondition, 7>& all_conditions() {
  static const std::array<AblationCondition, 7> conditions{{
      {"raw-single", false, false, false},
      {"raw-weighted-sum", false, true, false},
      {"single-wo-fft", true, false, false},
      {"weighted-sum-wo-fft", true, true, false},
      {"single-w-fft", false, false, true},
      {"weighted-sum-w-fft", false, true, true},
      {"proposed", true, true, true},
  }};
  return conditions;
}

/// Accepts the canonical names with '-', '_' or ' ' as separators, and
/// "w/o"/"w/" spellings.
inline AblationCondition parse_condition(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (std::size_t p; (p = s.find("w/o")) != std::string::npos;) s.replace(p, 3, "wo");
  for (std::size_t p; (p = s.find("w/")) != std::string::npos;) s.replace(p, 2, "w");
  std::replace(s.begin(), s.end(), '_', '-');
  std::replace(s.begin(), s.end(), ' ', '-');
  for (const auto& c : all_conditions()) {
    if (c.name == s) return c;
  }
  throw config_error("condition", "unknown ablation condition '" + s + "'");
}

/// Flags are only meaningful as one of the seven named combinations.
inline AblationCondition condition_from_flags(bool fine_tune, bool weighted_sum, bool fft_blocks) {
  for (const auto& c : all_conditions()) {
    if (c.fine_tune == fine_tune && c.weighted_sum == weighted_sum && c.fft_blocks == fft_blocks) return c;
  }
  throw config_error("condition", "flag combination is not one of the seven named conditions");
}

}  // namespace melsvc::melody
