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
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "melsvc/audio/clip.hpp"
#include "melsvc/dsp/features.hpp"
#include "melsvc/pitch/frame_track.hpp"

namespace melsvc::pitch {

/// A pitch tracker producing one frame per mel-grid frame.
class PitchExtractor {
 public:
  virtual ~PitchExtractor() = default;
  virtual std::string name() const = 0;
  virtual FrameTrack extract(const AudioClip& clip) const = 0;
};

/// Frame layout shared by the built-in trackers: 800-sample analysis windows
/// on the 160-sample hop, lag search for 50..1100 Hz.
struct AnalysisGrid {
  std::size_t frame = 800;
  std::size_t hop = 160;
  int sample_rate = kCanonicalRate;
  double min_f0 = kMinF0;
  double max_f0 = kMaxF0;
  /// Frames whose RMS falls below this are unvoiced without analysis.
  double silence_rms = 1e-4;

  std::size_t min_lag() const { return static_cast<std::size_t>(std::floor(sample_rate / max_f0)); }
  std::size_t max_lag() const { return static_cast<std::size_t>(std::ceil(sample_rate / min_f0)); }
};

namespace detail {

/// Vertex offset of the parabola through (-1, a), (0, b), (1, c).
inline double parabolic_offset(double a, double b, double c) {
  const double denom = a - 2.0 * b + c;
  if (std::abs(denom) < 1e-15) return 0.0;
  return std::clamp(0.5 * (a - c) / denom, -0.5, 0.5);
}

inline double frame_rms(std::span<const double> x) { return std::sqrt(mean_power(x)); }

inline void set_voiced(FrameTrack& track, std::size_t t, double f0, const AnalysisGrid& grid) {
  if (std::isfinite(f0) && f0 >= grid.min_f0 && f0 <= grid.max_f0) {
    track.f0_hz[t] = f0;
    track.vuv[t] = true;
  }
}

}  // namespace detail

/// YIN: cumulative-mean-normalized difference with an absolute threshold.
class YinExtractor final : public PitchExtractor {
 public:
  explicit YinExtractor(double threshold = 0.15, AnalysisGrid grid = {}) : threshold_(threshold), grid_(grid) {}

  std::string name() const override { return "yin"; }

  FrameTrack extract(const AudioClip& clip) const override {
    const std::size_t frames = dsp::frame_count(clip.size(), grid_.frame, grid_.hop);
    FrameTrack track = FrameTrack::unvoiced(frames, grid_.hop);
    const std::size_t tau_max = std::min(grid_.max_lag(), grid_.frame / 2);
    const std::size_t window = grid_.frame - tau_max;
    std::vector<double> diff(tau_max + 1), cmnd(tau_max + 1);
    for (std::size_t t = 0; t < frames; ++t) {
      const std::span<const double> x(clip.samples.data() + t * grid_.hop, grid_.frame);
      if (detail::frame_rms(x) < grid_.silence_rms) continue;
      diff[0] = 0.0;
      for (std::size_t tau = 1; tau <= tau_max; ++tau) {
        double acc = 0.0;
        for (std::size_t j = 0; j < window; ++j) {
          const double d = x[j] - x[j + tau];
          acc += d * d;
        }
        diff[tau] = acc;
      }
      cmnd[0] = 1.0;
      double running = 0.0;
      for (std::size_t tau = 1; tau <= tau_max; ++tau) {
        running += diff[tau];
        cmnd[tau] = running > 0.0 ? diff[tau] * static_cast<double>(tau) / running : 1.0;
      }
      std::size_t best = 0;
      for (std::size_t tau = std::max<std::size_t>(grid_.min_lag(), 2); tau < tau_max; ++tau) {
        if (cmnd[tau] < threshold_) {
          while (tau + 1 < tau_max && cmnd[tau + 1] < cmnd[tau]) ++tau;
          best = tau;
          break;
        }
      }
      if (best == 0) continue;
      const double refined = static_cast<double>(best) + detail::parabolic_offset(cmnd[best - 1], cmnd[best], cmnd[best + 1]);
      detail::set_voiced(track, t, grid_.sample_rate / refined, grid_);
    }
    return track;
  }

 private:
  double threshold_;
  AnalysisGrid grid_;
};

/// Normalized cross-correlation over lags, preferring the shortest lag whose
/// peak is close to the global maximum.
class NccfExtractor final : public PitchExtractor {
 public:
  explicit NccfExtractor(double voicing_threshold = 0.6, AnalysisGrid grid = {})
      : voicing_(voicing_threshold), grid_(grid) {}

  std::string name() const override { return "nccf"; }

  FrameTrack extract(const AudioClip& clip) const override {
    const std::size_t frames = dsp::frame_count(clip.size(), grid_.frame, grid_.hop);
    FrameTrack track = FrameTrack::unvoiced(frames, grid_.hop);
    const std::size_t tau_max = std::min(grid_.max_lag(), grid_.frame / 2);
    const std::size_t tau_min = std::max<std::size_t>(grid_.min_lag(), 2);
    const std::size_t window = grid_.frame - tau_max;
    std::vector<double> r(tau_max + 2, 0.0);
    for (std::size_t t = 0; t < frames; ++t) {
      const std::span<const double> x(clip.samples.data() + t * grid_.hop, grid_.frame);
      if (detail::frame_rms(x) < grid_.silence_rms) continue;
      double e0 = 0.0;
      for (std::size_t j = 0; j < window; ++j) e0 += x[j] * x[j];
      double e_lag = 0.0;
      for (std::size_t j = tau_min - 1; j < tau_min - 1 + window; ++j) e_lag += x[j] * x[j];
      for (std::size_t tau = tau_min - 1; tau <= tau_max; ++tau) {
        if (tau > tau_min - 1) {
          e_lag += x[tau + window - 1] * x[tau + window - 1] - x[tau - 1] * x[tau - 1];
        }
        double acc = 0.0;
        for (std::size_t j = 0; j < window; ++j) acc += x[j] * x[j + tau];
        const double denom = std::sqrt(e0 * std::max(e_lag, 0.0));
        r[tau] = denom > 0.0 ? acc / denom : 0.0;
      }
      double global = -1.0;
      for (std::size_t tau = tau_min; tau < tau_max; ++tau) {
        if (r[tau] >= r[tau - 1] && r[tau] >= r[tau + 1]) global = std::max(global, r[tau]);
      }
      if (global < voicing_) continue;
      std::size_t best = 0;
      for (std::size_t tau = tau_min; tau < tau_max; ++tau) {
        if (r[tau] >= r[tau - 1] && r[tau] >= r[tau + 1] && r[tau] >= 0.9 * global) {
          best = tau;
          break;
        }
      }
      if (best == 0) continue;
      const double refined = static_cast<double>(best) + detail::parabolic_offset(r[best - 1], r[best], r[best + 1]);
      detail::set_voiced(track, t, grid_.sample_rate / refined, grid_);
    }
    return track;
  }

 private:
  double voicing_;
  AnalysisGrid grid_;
};

/// Autocorrelation of the Hann-windowed frame divided by the window's own
/// autocorrelation, with a small per-octave cost favouring higher pitch.
class WindowedAcfExtractor final : public PitchExtractor {
 public:
  explicit WindowedAcfExtractor(double voicing_threshold = 0.45, double octave_cost = 0.01, AnalysisGrid grid = {})
      : voicing_(voicing_threshold), octave_cost_(octave_cost), grid_(grid) {
    const auto w = dsp::make_window(dsp::Window::hann, grid_.frame);
    window_ = w;
    window_acf_ = autocorrelation(w);
  }

  std::string name() const override { return "windowed-acf"; }

  FrameTrack extract(const AudioClip& clip) const override {
    const std::size_t frames = dsp::frame_count(clip.size(), grid_.frame, grid_.hop);
    FrameTrack track = FrameTrack::unvoiced(frames, grid_.hop);
    const std::size_t tau_max = std::min(grid_.max_lag(), grid_.frame / 2);
    const std::size_t tau_min = std::max<std::size_t>(grid_.min_lag(), 2);
    std::vector<double> buf(grid_.frame);
    for (std::size_t t = 0; t < frames; ++t) {
      const std::span<const double> x(clip.samples.data() + t * grid_.hop, grid_.frame);
      if (detail::frame_rms(x) < grid_.silence_rms) continue;
      double mean = 0.0;
      for (double v : x) mean += v;
      mean /= static_cast<double>(x.size());
      for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = (x[i] - mean) * window_[i];
      const auto acf = autocorrelation(buf);
      if (!(acf[0] > 0.0)) continue;
      std::vector<double> r(tau_max + 2);
      for (std::size_t tau = 0; tau <= tau_max + 1; ++tau) {
        r[tau] = (acf[tau] / acf[0]) / (window_acf_[tau] / window_acf_[0]);
      }
      double best_score = -1e9, best_strength = 0.0;
      std::size_t best = 0;
      for (std::size_t tau = tau_min; tau <= tau_max; ++tau) {
        if (!(r[tau] >= r[tau - 1] && r[tau] >= r[tau + 1])) continue;
        const double score = r[tau] - octave_cost_ * std::log2(grid_.min_f0 * static_cast<double>(tau) / grid_.sample_rate);
        if (score > best_score) {
          best_score = score;
          best_strength = r[tau];
          best = tau;
        }
      }
      if (best == 0 || best_strength < voicing_) continue;
      const double refined = static_cast<double>(best) + detail::parabolic_offset(r[best - 1], r[best], r[best + 1]);
      detail::set_voiced(track, t, grid_.sample_rate / refined, grid_);
    }
    return track;
  }

 private:
  static std::vector<double> autocorrelation(const std::vector<double>& x) {
    std::size_t n = 1;
    while (n < 2 * x.size()) n <<= 1;
    std::vector<double> padded(n, 0.0);
    std::copy(x.begin(), x.end(), padded.begin());
    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> spec;
    fft.fwd(spec, padded);
    for (auto& c : spec) c = std::complex<double>(std::norm(c), 0.0);
    std::vector<double> out;
    fft.inv(out, spec);
    out.resize(x.size());
    return out;
  }

  double voicing_;
  double octave_cost_;
  AnalysisGrid grid_;
  std::vector<double> window_;
  std::vector<double> window_acf_;
};

/// The three hermetic trackers used for label fusion.
inline std::vector<std::shared_ptr<const PitchExtractor>> default_extractors() {
  return {std::make_shared<YinExtractor>(), std::make_shared<NccfExtractor>(),
          std::make_shared<WindowedAcfExtractor>()};
}

}  // namespace melsvc::pitch
