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
#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

#include "melsvc/audio/clip.hpp"
#include "melsvc/core/error.hpp"

namespace melsvc::dsp {

enum class Window { rectangular, hann };

/// Periodic window of length n (the DFT-even convention).
inline std::vector<double> make_window(Window kind, std::size_t n) {
  std::vector<double> w(n, 1.0);
  if (kind == Window::hann) {
    for (std::size_t i = 0; i < n; ++i) {
      w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
    }
  }
  return w;
}

/// Frames on the unpadded grid: floor((n - frame) / hop) + 1, or 0 if n < frame.
inline std::size_t frame_count(std::size_t num_samples, std::size_t frame, std::size_t hop) {
  if (num_samples < frame) return 0;
  return (num_samples - frame) / hop + 1;
}

/// One-sided short-time Fourier transform, T x (frame/2 + 1), no padding.
/// The DFT size equals the frame length.
inline Eigen::MatrixXcd stft(std::span<const double> x, std::size_t frame_samples, std::size_t hop_samples,
                             Window window) {
  if (hop_samples < 1 || frame_samples < hop_samples) {
    throw data_error("parameter", "stft requires frame >= hop >= 1");
  }
  if (x.size() < frame_samples) {
    throw data_error("short-input", "input of " + std::to_string(x.size()) +
                                        " samples is shorter than one frame of " +
                                        std::to_string(frame_samples));
  }
  const std::size_t frames = frame_count(x.size(), frame_samples, hop_samples);
  const std::size_t bins = frame_samples / 2 + 1;
  const auto w = make_window(window, frame_samples);
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> buf(frame_samples);
  std::vector<std::complex<double>> spec;
  Eigen::MatrixXcd out(static_cast<Eigen::Index>(frames), static_cast<Eigen::Index>(bins));
  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t start = t * hop_samples;
    for (std::size_t i = 0; i < frame_samples; ++i) buf[i] = x[start + i] * w[i];
    fft.fwd(spec, buf);
    for (std::size_t k = 0; k < bins; ++k) out(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k)) = spec[k];
  }
  return out;
}

inline Eigen::MatrixXcd stft(const AudioClip& clip, std::size_t frame_samples, std::size_t hop_samples,
                             Window window) {
  return stft(clip.view(), frame_samples, hop_samples, window);
}

/// Inverse of a one-sided spectrum frame of DFT size n.
inline std::vector<double> inverse_frame(const std::vector<std::complex<double>>& half, std::size_t n) {
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> out;
  fft.inv(out, half, static_cast<Eigen::Index>(n));
  return out;
}

}  // namespace melsvc::dsp
