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
#include <span>
#include <string>
#include <vector>

#include "melsvc/core/error.hpp"
#include "melsvc/core/hash.hpp"

namespace melsvc {

inline constexpr int kCanonicalRate = 16000;

/// Mono audio at a fixed sample rate.
struct AudioClip {
  std::vector<double> samples;
  int sample_rate = kCanonicalRate;
  std::string source_id;

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }
  double duration_seconds() const { return static_cast<double>(samples.size()) / sample_rate; }
  std::span<const double> view() const noexcept { return samples; }

  std::string content_hash() const { return hash_samples(samples); }
};

/// Mean squared sample value; 0 for an empty clip.
inline double mean_power(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return acc / static_cast<double>(x.size());
}

inline double peak_abs(std::span<const double> x) {
  double p = 0.0;
  for (double v : x) p = std::max(p, std::abs(v));
  return p;
}

/// Throws unless the clip is a finite, in-range, canonical-rate mono clip.
inline void validate_clip(const AudioClip& clip, int expected_rate = kCanonicalRate) {
  if (clip.sample_rate != expected_rate) {
    throw data_error("sample-rate", "clip '" + clip.source_id + "' has rate " +
                                        std::to_string(clip.sample_rate) + ", expected " +
                                        std::to_string(expected_rate));
  }
  for (double v : clip.samples) {
    if (!std::isfinite(v)) throw data_error("non-finite", "clip '" + clip.source_id + "' has a non-finite sample");
    if (std::abs(v) > 1.0) throw data_error("range", "clip '" + clip.source_id + "' exceeds [-1, 1]");
  }
}

}  // namespace melsvc
