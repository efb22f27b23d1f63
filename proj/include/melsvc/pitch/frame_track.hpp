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

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "melsvc/core/error.hpp"

namespace melsvc {

inline constexpr double kMinF0 = 50.0;
inline constexpr double kMaxF0 = 1100.0;

/// Per-frame pitch and voicing on a fixed hop. Unvoiced frames carry f0 = 0.
struct FrameTrack {
  std::vector<double> f0_hz;
  std::vector<bool> vuv;
  std::size_t hop_samples = 160;

  std::size_t size() const noexcept { return f0_hz.size(); }

  static FrameTrack unvoiced(std::size_t frames, std::size_t hop = 160) {
    return {std::vector<double>(frames, 0.0), std::vector<bool>(frames, false), hop};
  }

  std::size_t voiced_count() const {
    std::size_t n = 0;
    for (bool v : vuv) n += v;
    return n;
  }

  bool operator==(const FrameTrack&) const = default;
};

/// Throws unless vuv/f0 are coupled, voiced values lie in the singing range,
/// and (optionally) the length matches the expected frame count.
inline void validate_track(const FrameTrack& t, std::optional<std::size_t> expected_frames = std::nullopt) {
  if (t.f0_hz.size() != t.vuv.size()) throw data_error("track", "f0 and vuv lengths differ");
  if (expected_frames && t.size() != *expected_frames) {
    throw data_error("alignment", "track has " + std::to_string(t.size()) + " frames, expected " +
                                      std::to_string(*expected_frames));
  }
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double f = t.f0_hz[i];
    if (t.vuv[i]) {
      if (!(f >= kMinF0 && f <= kMaxF0)) {
        throw data_error("track", "voiced f0 " + std::to_string(f) + " Hz outside singing range at frame " +
                                      std::to_string(i));
      }
    } else if (f != 0.0) {
      throw data_error("track", "unvoiced frame " + std::to_string(i) + " has nonzero f0");
    }
  }
}

}  // namespace melsvc
