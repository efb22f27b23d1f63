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

#include <cmath>
#include <vector>

#include "melsvc/audio/clip.hpp"
#include "melsvc/dsp/stft.hpp"

namespace melsvc::dsp {

/// Analysis grid shared by the mel spectrogram, energy, and pitch labels:
/// 50 ms Hann frames with a 10 ms hop at 16 kHz, no padding.
struct MelConfig {
  int sample_rate = kCanonicalRate;
  std::size_t frame_samples = 800;
  std::size_t hop_samples = 160;
  int n_mels = 80;
  double f_min = 0.0;
  double f_max = 8000.0;
  double log_floor = 1e-5;

  double frame_ms() const { return 1000.0 * static_cast<double>(frame_samples) / sample_rate; }
  double hop_ms() const { return 1000.0 * static_cast<double>(hop_samples) / sample_rate; }
};

struct MelSpectrogram {
  Eigen::MatrixXd frames;  // T x n_mels, natural-log magnitudes
  double frame_size_ms = 50.0;
  double hop_ms = 10.0;
  Window window = Window::hann;

  Eigen::Index num_frames() const { return frames.rows(); }
};

struct EnergyTrack {
  std::vector<double> values;
  std::size_t hop_samples = 160;
};

inline std::size_t mel_frame_count(std::size_t num_samples, const MelConfig& cfg = {}) {
  return frame_count(num_samples, cfg.frame_samples, cfg.hop_samples);
}

// Slaney-style mel scale: linear below 1 kHz, logarithmic above.
inline double hz_to_mel(double hz) {
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  constexpr double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  return hz < min_log_hz ? hz / f_sp : min_log_mel + std::log(hz / min_log_hz) / logstep;
}

inline double mel_to_hz(double mel) {
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  constexpr double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  return mel < min_log_mel ? mel * f_sp : min_log_hz * std::exp(logstep * (mel - min_log_mel));
}

/// Area-normalized triangular filters, n_mels x (n_fft/2 + 1).
inline Eigen::MatrixXd mel_filterbank(const MelConfig& cfg) {
  const std::size_t bins = cfg.frame_samples / 2 + 1;
  const double mel_lo = hz_to_mel(cfg.f_min);
  const double mel_hi = hz_to_mel(cfg.f_max);
  std::vector<double> edges(static_cast<std::size_t>(cfg.n_mels) + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / static_cast<double>(cfg.n_mels + 1));
  }
  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(cfg.n_mels, static_cast<Eigen::Index>(bins));
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    const double norm = 2.0 / (hi - lo);
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * cfg.sample_rate / static_cast<double>(cfg.frame_samples);
      const double up = (f - lo) / (mid - lo);
      const double down = (hi - f) / (hi - mid);
      fb(m, static_cast<Eigen::Index>(k)) = std::max(0.0, std::min(up, down)) * norm;
    }
  }
  return fb;
}

/// Linear-magnitude mel energies, T x n_mels.
inline Eigen::MatrixXd mel_magnitudes(const AudioClip& clip, const MelConfig& cfg = {}) {
  const Eigen::MatrixXcd spec = stft(clip, cfg.frame_samples, cfg.hop_samples, Window::hann);
  const Eigen::MatrixXd mag = spec.cwiseAbs();
  return mag * mel_filterbank(cfg).transpose();
}

/// log(max(mel magnitude, floor)) on the canonical grid.
inline MelSpectrogram mel_spectrogram(const AudioClip& clip, const MelConfig& cfg = {}) {
  if (clip.sample_rate != cfg.sample_rate) {
    throw data_error("sample-rate", "mel_spectrogram expects " + std::to_string(cfg.sample_rate) + " Hz input");
  }
  MelSpectrogram out;
  out.frames = mel_magnitudes(clip, cfg).array().max(cfg.log_floor).log().matrix();
  out.frame_size_ms = cfg.frame_ms();
  out.hop_ms = cfg.hop_ms();
  out.window = Window::hann;
  return out;
}

/// Per-frame sqrt(mean over bins |X[t, k]|^2) on the mel grid.
inline EnergyTrack rms_energy(const AudioClip& clip, const MelConfig& cfg = {}) {
  const Eigen::MatrixXcd spec = stft(clip, cfg.frame_samples, cfg.hop_samples, Window::hann);
  EnergyTrack out;
  out.hop_samples = cfg.hop_samples;
  out.values.resize(static_cast<std::size_t>(spec.rows()));
  for (Eigen::Index t = 0; t < spec.rows(); ++t) {
    out.values[static_cast<std::size_t>(t)] = std::sqrt(spec.row(t).cwiseAbs2().mean());
  }
  return out;
}

}  // namespace melsvc::dsp
