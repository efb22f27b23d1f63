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
#include <numbers>
#include <span>
#include <vector>

#include "melsvc/core/error.hpp"

namespace melsvc {

struct SincKernel {
  int zero_crossings = 16;
  double kaiser_beta = 8.6;
};

/// Band-limited interpolation of `x` at positions n * step for n = 0, 1, ...
///
/// `step` is the number of input samples advanced per output sample; the
/// low-pass cutoff follows min(1, 1/step) of the input Nyquist frequency so
/// decimation does not alias. The output covers input positions [0, len-1].
inline std::vector<double> resample_by_step(std::span<const double> x, double step,
                                            SincKernel kernel = {}) {
  if (!(step > 0.0) || !std::isfinite(step)) {
    throw data_error("parameter", "resampling step must be positive and finite");
  }
  if (x.empty()) return {};
  if (step == 1.0) return {x.begin(), x.end()};

  const auto n_in = static_cast<long>(x.size());
  const long n_out = static_cast<long>(std::floor(static_cast<double>(n_in - 1) / step)) + 1;
  const double cutoff = std::min(1.0, 1.0 / step);
  const double half_width = kernel.zero_crossings / cutoff;
  const double i0_beta = std::cyl_bessel_i(0.0, kernel.kaiser_beta);

  auto tap = [&](double t) {
    const double r = t / half_width;
    if (std::abs(r) >= 1.0) return 0.0;
    const double w = std::cyl_bessel_i(0.0, kernel.kaiser_beta * std::sqrt(1.0 - r * r)) / i0_beta;
    const double a = std::numbers::pi * cutoff * t;
    const double sinc = std::abs(a) < 1e-12 ? 1.0 : std::sin(a) / a;
    return cutoff * sinc * w;
  };

  std::vector<double> y(static_cast<std::size_t>(n_out));
  for (long n = 0; n < n_out; ++n) {
    const double pos = static_cast<double>(n) * step;
    const long lo = std::max(0L, static_cast<long>(std::ceil(pos - half_width)));
    const long hi = std::min(n_in - 1, static_cast<long>(std::floor(pos + half_width)));
    double acc = 0.0;
    for (long k = lo; k <= hi; ++k) acc += x[static_cast<std::size_t>(k)] * tap(pos - static_cast<double>(k));
    y[static_cast<std::size_t>(n)] = acc;
  }
  return y;
}

/// Sample-rate conversion from `from_rate` to `to_rate`.
inline std::vector<double> resample(std::span<const double> x, int from_rate, int to_rate) {
  if (from_rate <= 0 || to_rate <= 0) throw data_error("parameter", "sample rates must be positive");
  if (from_rate == to_rate) return {x.begin(), x.end()};
  return resample_by_step(x, static_cast<double>(from_rate) / static_cast<double>(to_rate));
}

}  // namespace melsvc
