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
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "melsvc/core/error.hpp"
#include "melsvc/pitch/frame_track.hpp"

namespace melsvc::eval {

namespace detail {

/// Affine map of v onto [0, 1]; a constant contour maps to all zeros.
inline std::vector<double> min_max(const std::vector<double>& v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double range = *hi - *lo;
  std::vector<double> out(v.size(), 0.0);
  if (range > 0.0)
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - *lo) / range;
  return out;
}

inline std::vector<double> voiced_values(const FrameTrack& t, bool log_f0) {
  std::vector<double> out;
  for (std::size_t i = 0; i < t.size(); ++i)
    if (t.vuv[i]) out.push_back(log_f0 ? std::log(t.f0_hz[i]) : t.f0_hz[i]);
  return out;
}

}  // namespace detail

/// RMSE between min-max-normalised contours over frames voiced in both
/// tracks. Empty overlap is undefined (nullopt), never 0.
inline std::optional<double> f0rmse(const FrameTrack& source, const FrameTrack& converted) {
  std::vector<double> a, b;
  const std::size_t n = std::min(source.size(), converted.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (source.vuv[i] && converted.vuv[i]) {
      a.push_back(source.f0_hz[i]);
      b.push_back(converted.f0_hz[i]);
    }
  }
  if (a.empty()) return std::nullopt;
  const auto na = detail::min_max(a), nb = detail::min_max(b);
  double s = 0.0;
  for (std::size_t i = 0; i < na.size(); ++i) s += (na[i] - nb[i]) * (na[i] - nb[i]);
  return std::sqrt(s / static_cast<double>(na.size()));
}

struct DtwResult {
  double cost = 0.0;
  std::vector<std::pair<std::size_t, std::size_t>> path;  // from (0, 0) to (n-1, m-1)
};

/// Dynamic time warping with |a_i - b_j| local cost and steps (1,1), (1,0),
/// (0,1). The path is anchored at both corners; equal-cost predecessors are
/// resolved diagonal first, then (i-1, j), then (i, j-1).
inline DtwResult dtw(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) throw data_error("dtw", "dtw needs non-empty sequences");
  const std::size_t n = a.size(), m = b.size();
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> acc(n * m, inf);
  auto at = [&](std::size_t i, std::size_t j) -> double& { return acc[i * m + j]; };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double local = std::abs(a[i] - b[j]);
      if (i == 0 && j == 0) {
        at(i, j) = local;
        continue;
      }
      double best = inf;
      if (i > 0 && j > 0) best = at(i - 1, j - 1);
      if (i > 0) best = std::min(best, at(i - 1, j));
      if (j > 0) best = std::min(best, at(i, j - 1));
      at(i, j) = local + best;
    }
  }
  DtwResult r;
  r.cost = at(n - 1, m - 1);
  std::size_t i = n - 1, j = m - 1;
  r.path.emplace_back(i, j);
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const double d = at(i - 1, j - 1), up = at(i - 1, j), left = at(i, j - 1);
      if (d <= up && d <= left) {
        --i;
        --j;
      } else if (up <= left) {
        --i;
      } else {
        --j;
      }
    } else if (i > 0) {
      --i;
    } else {
      --j;
    }
    r.path.emplace_back(i, j);
  }
  std::reverse(r.path.begin(), r.path.end());
  return r;
}

inline std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<double>(x.size());
  if (x.size() < 2 || x.size() != y.size()) return std::nullopt;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// Pearson correlation of the voiced (log-)f0 subsequences after DTW
/// alignment. Undefined with fewer than 2 voiced frames or zero variance.
inline std::optional<double> f0corr(const FrameTrack& source, const FrameTrack& converted, bool log_f0 = true) {
  const auto a = detail::voiced_values(source, log_f0), b = detail::voiced_values(converted, log_f0);
  if (a.size() < 2 || b.size() < 2) return std::nullopt;
  const DtwResult r = dtw(a, b);
  std::vector<double> x, y;
  x.reserve(r.path.size());
  y.reserve(r.path.size());
  for (const auto& [i, j] : r.path) {
    x.push_back(a[i]);
    y.push_back(b[j]);
  }
  return pearson(x, y);
}

}  // namespace melsvc::eval
