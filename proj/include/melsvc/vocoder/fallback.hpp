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

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "melsvc/audio/clip.hpp"
#include "melsvc/core/error.hpp"
#include "melsvc/core/random.hpp"
#include "melsvc/dsp/features.hpp"

namespace melsvc::vocoder {

struct FallbackConfig {
  int nnls_iterations = 200;
  int phase_iterations = 48;
  std::uint64_t phase_seed = 0x9e11;
};

/// Samples produced for T frames on the unpadded grid.
inline std::size_t output_samples(std::size_t frames, const dsp::MelConfig& grid = {}) {
  return frames == 0 ? 0 : (frames - 1) * grid.hop_samples + grid.frame_samples;
}

/// Non-negative linear magnitudes S (T x bins) with fb * S_t ~= mel_t, by
/// multiplicative NNLS updates started from the clamped pseudo-inverse.
/// Values at or below the log floor are treated as zero energy.
inline Eigen::MatrixXd mel_to_linear(const Eigen::MatrixXd& log_mel, const dsp::MelConfig& grid = {},
                                     int iterations = 200) {
  const Eigen::MatrixXd fb = dsp::mel_filterbank(grid);  // mels x bins
  Eigen::MatrixXd m = log_mel.array().exp().matrix();
  const double floor = grid.log_floor * (1.0 + 1e-9);
  m = (m.array() <= floor).select(0.0, m);
  const Eigen::MatrixXd pinv = fb.completeOrthogonalDecomposition().pseudoInverse();  // bins x mels
  // Bins no filter covers stay zero; elsewhere a tiny positive seed lets the
  // multiplicative updates move off zero.
  const Eigen::RowVectorXd covered = (fb.colwise().sum().array() > 0.0).cast<double>();
  Eigen::MatrixXd s = (m * pinv.transpose()).cwiseMax(0.0);
  for (Eigen::Index t = 0; t < s.rows(); ++t) {
    if (m.row(t).sum() > 0.0) s.row(t) = ((s.row(t).array() + 1e-12) * covered.array()).matrix();
    else s.row(t).setZero();
  }
  const Eigen::MatrixXd numer = m * fb;  // T x bins
  for (int it = 0; it < iterations; ++it) {
    const Eigen::MatrixXd denom = (s * fb.transpose()) * fb;
    s = (s.array() * numer.array() / (denom.array() + 1e-30)).matrix();
  }
  return s;
}

/// Weighted overlap-add inverse STFT with window-square normalisation.
inline std::vector<double> istft(const Eigen::MatrixXcd& spec, const dsp::MelConfig& grid = {}) {
  const std::size_t n = grid.frame_samples, hop = grid.hop_samples;
  const auto frames = static_cast<std::size_t>(spec.rows());
  const auto w = dsp::make_window(dsp::Window::hann, n);
  std::vector<double> out(output_samples(frames, grid), 0.0), wsum(out.size(), 0.0);
  std::vector<std::complex<double>> half(static_cast<std::size_t>(spec.cols()));
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t k = 0; k < half.size(); ++k) half[k] = spec(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k));
    const auto frame = dsp::inverse_frame(half, n);
    for (std::size_t i = 0; i < n; ++i) {
      out[t * hop + i] += frame[i] * w[i];
      wsum[t * hop + i] += w[i] * w[i];
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = wsum[i] > 1e-6 ? out[i] / wsum[i] : 0.0;
  return out;
}

/// Phase recovery by alternating projections between the magnitude
/// constraint and the set of consistent spectrograms.
inline std::vector<double> griffin_lim(const Eigen::MatrixXd& magnitude, const FallbackConfig& cfg = {},
                                       const dsp::MelConfig& grid = {}) {
  Rng rng(cfg.phase_seed);
  Eigen::MatrixXcd spec(magnitude.rows(), magnitude.cols());
  for (Eigen::Index t = 0; t < spec.rows(); ++t)
    for (Eigen::Index k = 0; k < spec.cols(); ++k)
      spec(t, k) = std::polar(magnitude(t, k), rng.uniform(-std::numbers::pi, std::numbers::pi));
  std::vector<double> x = istft(spec, grid);
  for (int it = 0; it < cfg.phase_iterations; ++it) {
    const Eigen::MatrixXcd re = dsp::stft(x, grid.frame_samples, grid.hop_samples, dsp::Window::hann);
    for (Eigen::Index t = 0; t < spec.rows(); ++t) {
      for (Eigen::Index k = 0; k < spec.cols(); ++k) {
        const double a = std::abs(re(t, k));
        spec(t, k) = a > 0.0 ? re(t, k) * (magnitude(t, k) / a) : std::complex<double>(magnitude(t, k), 0.0);
      }
    }
    x = istft(spec, grid);
  }
  return x;
}

inline void check_grid(const dsp::MelSpectrogram& mel, const dsp::MelConfig& grid = {}) {
  if (std::abs(mel.hop_ms - grid.hop_ms()) > 1e-9 || std::abs(mel.frame_size_ms - grid.frame_ms()) > 1e-9 ||
      mel.frames.cols() != grid.n_mels) {
    throw data_error("grid", "mel is not on the " + std::to_string(grid.frame_ms()) + " ms / " +
                                 std::to_string(grid.hop_ms()) + " ms x " + std::to_string(grid.n_mels) + " grid");
  }
  if (mel.frames.rows() == 0) throw data_error("grid", "mel has no frames");
}

/// Mel pseudo-inverse followed by phase recovery; needs no model files.
inline AudioClip fallback_synthesize(const dsp::MelSpectrogram& mel, const FallbackConfig& cfg = {}) {
  const dsp::MelConfig grid;
  check_grid(mel, grid);
  if (!mel.frames.allFinite()) throw data_error("non-finite", "mel contains non-finite values");
  AudioClip out;
  out.sample_rate = grid.sample_rate;
  out.samples = griffin_lim(mel_to_linear(mel.frames, grid, cfg.nnls_iterations), cfg, grid);
  return out;
}

}  // namespace melsvc::vocoder
