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

#include <filesystem>
#include <string>

#include "melsvc/audio/clip.hpp"
#include "melsvc/audio/resample.hpp"
#include "melsvc/audio/wav.hpp"

namespace melsvc {

/// Clip from decoded channels: channel average, resample, and peak
/// normalization only when the peak exceeds full scale.
inline AudioClip canonicalize(const wav::Decoded& decoded, int target_rate, std::string source_id) {
  const std::size_t frames = decoded.channel_data.empty() ? 0 : decoded.channel_data[0].size();
  if (frames == 0) throw data_error("empty-clip", "audio has zero length: " + source_id);
  std::vector<double> mono;
  if (decoded.channels == 1) {
    mono = decoded.channel_data[0];
  } else {
    mono.assign(frames, 0.0);
    for (const auto& ch : decoded.channel_data) {
      for (std::size_t i = 0; i < frames; ++i) mono[i] += ch[i];
    }
    for (double& v : mono) v /= decoded.channels;
  }
  AudioClip clip;
  clip.samples = resample(mono, decoded.sample_rate, target_rate);
  clip.sample_rate = target_rate;
  clip.source_id = std::move(source_id);
  for (double v : clip.samples) {
    if (!std::isfinite(v)) throw data_error("non-finite", "non-finite sample in " + clip.source_id);
  }
  if (const double peak = peak_abs(clip.samples); peak > 1.0) {
    for (double& v : clip.samples) v /= peak;
  }
  return clip;
}

/// Loads a WAV file as a canonical mono clip at `target_rate`.
inline AudioClip ingest(const std::filesystem::path& path, int target_rate = kCanonicalRate) {
  if (!std::filesystem::exists(path)) {
    throw data_error("ingestion", "audio file does not exist: " + path.string());
  }
  return canonicalize(wav::read(path), target_rate, path.string());
}

inline void write_clip(const std::filesystem::path& path, const AudioClip& clip) {
  wav::write_pcm16(path, clip.samples, clip.sample_rate);
}

inline AudioClip make_clip(std::vector<double> samples, std::string source_id = {},
                           int rate = kCanonicalRate) {
  AudioClip c;
  c.samples = std::move(samples);
  c.sample_rate = rate;
  c.source_id = std::move(source_id);
  return c;
}

}  // namespace melsvc
