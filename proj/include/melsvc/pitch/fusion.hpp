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
#include <cmath>
#include <span>

#include "melsvc/core/error.hpp"
#include "melsvc/pitch/frame_track.hpp"

namespace melsvc::pitch {

/// Re-grids a track onto `target_frames` frames of `target_hop` samples by
/// nearest-frame snapping (both grids share the same time origin).
inline FrameTrack snap_to_grid(const FrameTrack& track, std::size_t target_hop, std::size_t target_frames) {
  if (track.hop_samples == target_hop && track.size() == target_frames) return track;
  FrameTrack out = FrameTrack::unvoiced(target_frames, target_hop);
  if (track.size() == 0) return out;
  for (std::size_t t = 0; t < target_frames; ++t) {
    const double src = static_cast<double>(t * target_hop) / static_cast<double>(track.hop_samples);
    const auto i = std::min(track.size() - 1, static_cast<std::size_t>(std::llround(src)));
    out.f0_hz[t] = track.f0_hz[i];
    out.vuv[t] = track.vuv[i];
  }
  return out;
}

/// Median-of-three fusion: voicing by majority vote; where voiced, the median
/// of the voiced extractors' values, or the geometric mean when only two of
/// them voiced the frame.
inline FrameTrack median_fuse(std::span<const FrameTrack> tracks) {
  if (tracks.size() != 3) throw data_error("alignment", "median_fuse needs exactly three tracks");
  const std::size_t n = tracks[0].size();
  const std::size_t hop = tracks[0].hop_samples;
  for (const auto& t : tracks) {
    if (t.size() != n || t.vuv.size() != n || t.hop_samples != hop) {
      throw data_error("alignment", "median_fuse inputs differ in length or hop");
    }
  }
  FrameTrack out = FrameTrack::unvoiced(n, hop);
  std::array<double, 3> values{};
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t k = 0;
    for (const auto& t : tracks) {
      if (t.vuv[i]) values[k++] = t.f0_hz[i];
    }
    if (k < 2) continue;
    std::sort(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k));
    out.f0_hz[i] = k == 3 ? values[1] : std::sqrt(values[0] * values[1]);
    out.vuv[i] = true;
  }
  return out;
}

inline FrameTrack median_fuse(const FrameTrack& a, const FrameTrack& b, const FrameTrack& c) {
  const std::array<FrameTrack, 3> tracks{a, b, c};
  return median_fuse(tracks);
}

}  // namespace melsvc::pitch
