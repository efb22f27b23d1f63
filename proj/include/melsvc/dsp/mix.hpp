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
#include <span>
#include <vector>

#include "melsvc/audio/clip.hpp"
#include "melsvc/audio/resample.hpp"
#include "melsvc/core/error.hpp"
#include "melsvc/core/random.hpp"

namespace melsvc::dsp {

struct MixResult {
  AudioClip mixture;
  /// Gain applied to the fitted BGM before any joint rescale.
  double gain = 1.0;
  /// Joint peak rescale factor applied to both parts (1 when no clipping).
  double scale = 1.0;
  /// The fitted, gained and rescaled BGM that was added.
  std::vector<double> noise;
};

/// BGM cropped (from `offset`) or looped to exactly `length` samples.
inline std::vector<double> fit_length(std::span<const double> bgm, std::size_t length, std::size_t offset = 0) {
  std::vector<double> out(length);
  if (bgm.empty()) return out;
  for (std::size_t i = 0; i < length; ++i) out[i] = bgm[(offset + i) % bgm.size()];
  return out;
}

inline double snr_db(std::span<const double> signal, std::span<const double> noise) {
  return 10.0 * std::log10(mean_power(signal) / mean_power(noise));
}

/// Adds BGM to a vocal at a target SNR measured over the full clip.
inline MixResult mix_at_snr_detailed(const AudioClip& vocal, const AudioClip& bgm, double target_snr_db,
                                     std::size_t bgm_offset = 0) {
  if (vocal.sample_rate != bgm.sample_rate) {
    throw data_error("sample-rate", "vocal and bgm sample rates differ");
  }
  const double p_vocal = mean_power(vocal.samples);
  if (!(p_vocal > 0.0)) throw data_error("degenerate-signal", "vocal '" + vocal.source_id + "' is silent");
  std::vector<double> fitted = fit_length(bgm.samples, vocal.size(), bgm_offset);
  const double p_bgm = mean_power(fitted);
  if (!(p_bgm > 0.0)) throw data_error("degenerate-noise", "bgm '" + bgm.source_id + "' is silent");

  MixResult r;
  r.gain = std::sqrt(p_vocal / (p_bgm * std::pow(10.0, target_snr_db / 10.0)));
  std::vector<double> out(vocal.size());
  double peak = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    fitted[i] *= r.gain;
    out[i] = vocal.samples[i] + fitted[i];
    peak = std::max(peak, std::abs(out[i]));
  }
  if (peak > 1.0) {
    r.scale = 1.0 / peak;
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] *= r.scale;
      fitted[i] *= r.scale;
    }
  }
  r.mixture.samples = std::move(out);
  r.mixture.sample_rate = vocal.sample_rate;
  r.mixture.source_id = vocal.source_id + "+" + bgm.source_id;
  r.noise = std::move(fitted);
  return r;
}

inline AudioClip mix_at_snr(const AudioClip& vocal, const AudioClip& bgm, double target_snr_db) {
  return mix_at_snr_detailed(vocal, bgm, target_snr_db).mixture;
}

struct SnrRange {
  double lo = 0.0;
  double hi = 15.0;
};

struct Augmentation {
  AudioClip clip;
  bool augmented = false;
  double snr_db = 0.0;
  std::size_t bgm_index = 0;
};

/// With probability p, mixes the vocal with a random pool BGM at an SNR drawn
/// uniformly from the range; otherwise returns the vocal unchanged. Silent
/// pool entries are never chosen.
inline Augmentation apply_bgm_augmentation(const AudioClip& vocal, std::span<const AudioClip> bgm_pool, double p,
                                           SnrRange snr_range, Rng& rng) {
  Augmentation out;
  if (!rng.bernoulli(p)) {
    out.clip = vocal;
    return out;
  }
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < bgm_pool.size(); ++i) {
    if (mean_power(bgm_pool[i].samples) > 0.0) eligible.push_back(i);
  }
  if (eligible.empty()) {
    throw data_error("pool", bgm_pool.empty() ? "BGM pool is empty" : "BGM pool has only silent clips");
  }
  out.bgm_index = eligible[rng.below(eligible.size())];
  out.snr_db = rng.uniform(snr_range.lo, snr_range.hi);
  const AudioClip& bgm = bgm_pool[out.bgm_index];
  std::size_t offset = 0;
  if (bgm.size() > vocal.size()) offset = rng.below(bgm.size() - vocal.size() + 1);
  out.clip = mix_at_snr_detailed(vocal, bgm, out.snr_db, offset).mixture;
  out.augmented = true;
  return out;
}

/// Playback-speed change by resampling: duration scales by 1/rate and pitch by rate.
inline AudioClip speed_perturb(const AudioClip& clip, double rate) {
  if (!(rate > 0.0) || !std::isfinite(rate)) {
    throw data_error("parameter", "speed rate must be positive, got " + std::to_string(rate));
  }
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.source_id = clip.source_id;
  out.samples = resample_by_step(clip.samples, rate);
  if (const double peak = peak_abs(out.samples); peak > 1.0) {
    for (double& v : out.samples) v /= peak;
  }
  return out;
}

}  // namespace melsvc::dsp
