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
#include <numeric>

#include "melsvc/core/error.hpp"
#include "melsvc/nn/ops.hpp"

namespace melsvc::ssl {

using nn::Mat;

/// Reduced p/q with |source/target - p/q| < 1e-9 and q <= 1000.
inline std::pair<long, long> rational_ratio(double source_hop_ms, double target_hop_ms) {
  if (!(source_hop_ms > 0.0) || !(target_hop_ms > 0.0)) {
    throw data_error("unsupported-rate", "frame hops must be positive");
  }
  const double r = source_hop_ms / target_hop_ms;
  for (long q = 1; q <= 1000; ++q) {
    const double p = std::round(r * static_cast<double>(q));
    if (p >= 1.0 && std::abs(r - p / static_cast<double>(q)) < 1e-9) {
      const long pi = static_cast<long>(p);
      const long g = std::gcd(pi, q);
      return {pi / g, q / g};
    }
  }
  throw data_error("unsupported-rate", "hop ratio " + std::to_string(r) + " is not a simple rational");
}

/// Interpolation operator, target_frames x source_frames. Output frame j
/// samples the source at position j * target_hop / source_hop, clamped to the
/// last source frame (edge padding). At most 2 padded frames are accepted
/// unless the source is a single frame.
inline Mat interpolation_matrix(Eigen::Index source_frames, double source_hop_ms, double target_hop_ms,
                                Eigen::Index target_frames) {
  const auto [p, q] = rational_ratio(source_hop_ms, target_hop_ms);
  if (source_frames < 1) throw data_error("short-input", "no source frames to align");
  const Eigen::Index natural = (source_frames - 1) * p / q + 1;
  if (source_frames > 1 && target_frames > natural + 2) {
    throw data_error("alignment", "aligning " + std::to_string(source_frames) + " frames to " +
                                      std::to_string(target_frames) + " needs more than 2 padded frames");
  }
  Mat a = Mat::Zero(target_frames, source_frames);
  for (Eigen::Index j = 0; j < target_frames; ++j) {
    const double pos = static_cast<double>(j) * static_cast<double>(q) / static_cast<double>(p);
    const auto lo = static_cast<Eigen::Index>(std::floor(pos));
    if (lo >= source_frames - 1) {
      a(j, source_frames - 1) = 1.0;
      continue;
    }
    const double frac = pos - static_cast<double>(lo);
    a(j, lo) += 1.0 - frac;
    if (frac > 0.0) a(j, lo + 1) += frac;
  }
  return a;
}

inline Mat align_frames(const Mat& features, double source_hop_ms, double target_hop_ms, Eigen::Index target_frames) {
  return interpolation_matrix(features.rows(), source_hop_ms, target_hop_ms, target_frames) * features;
}

inline nn::Var align_frames(nn::Var features, double source_hop_ms, double target_hop_ms, Eigen::Index target_frames) {
  return nn::left_apply(interpolation_matrix(features.rows(), source_hop_ms, target_hop_ms, target_frames), features);
}

}  // namespace melsvc::ssl
