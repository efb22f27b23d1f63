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
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "melsvc/audio/clip.hpp"
#include "melsvc/audio/wav.hpp"
#include "melsvc/core/random.hpp"

// Synthetic vocals and accompaniment for toy-scale corpora and tests.
namespace melsvc::synth {

inline AudioClip sine(double freq_hz, double seconds, double amplitude = 0.5, int rate = kCanonicalRate,
                      double phase = 0.0) {
  AudioClip c;
  c.sample_rate = rate;
  c.samples.resize(static_cast<std::size_t>(std::llround(seconds * rate)));
  for (std::size_t i = 0; i < c.samples.size(); ++i) {
    c.samples[i] = amplitude * std::sin(2.0 * std::numbers::pi * freq_hz * static_cast<double>(i) / rate + phase);
  }
  c.source_id = "sine" + std::to_string(freq_hz);
  return c;
}

inline AudioClip silence(double seconds, int rate = kCanonicalRate) {
  AudioClip c;
  c.sample_rate = rate;
  c.samples.assign(static_cast<std::size_t>(std::llround(seconds * rate)), 0.0);
  c.source_id = "silence";
  return c;
}

inline AudioClip white_noise(double seconds, double rms, Rng& rng, int rate = kCanonicalRate) {
  AudioClip c;
  c.sample_rate = rate;
  c.samples.resize(static_cast<std::size_t>(std::llround(seconds * rate)));
  for (double& v : c.samples) v = rms * rng.normal();
  c.source_id = "noise";
  return c;
}

struct VoiceParams {
  double seconds = 1.0;
  double base_f0 = 300.0;
  /// Linear glide over the clip, in semitones.
  double glide_semitones = 0.0;
  double vibrato_hz = 5.0;
  double vibrato_cents = 30.0;
  double amplitude = 0.4;
  /// Relative amplitudes of harmonics 2, 3, ... (empty for a pure sine).
  std::vector<double> overtones;
  double noise_rms = 0.002;
  /// Seconds of silence (plus noise floor) at start and end.
  double edge_silence = 0.0;
};

/// Sung-note-like tone: glide plus vibrato with optional overtones.
inline AudioClip voice(const VoiceParams& p, Rng& rng, int rate = kCanonicalRate) {
  AudioClip c;
  c.sample_rate = rate;
  const std::size_t n = static_cast<std::size_t>(std::llround(p.seconds * rate));
  c.samples.resize(n);
  double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double vib_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const auto edge = static_cast<std::size_t>(p.edge_silence * rate);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate;
    const double semis = p.glide_semitones * t / std::max(p.seconds, 1e-9);
    const double cents = p.vibrato_cents * std::sin(2.0 * std::numbers::pi * p.vibrato_hz * t + vib_phase);
    const double f0 = p.base_f0 * std::pow(2.0, semis / 12.0 + cents / 1200.0);
    phase += 2.0 * std::numbers::pi * f0 / rate;
    double v = std::sin(phase);
    for (std::size_t h = 0; h < p.overtones.size(); ++h) v += p.overtones[h] * std::sin(static_cast<double>(h + 2) * phase);
    const bool active = i >= edge && i + edge < n;
    c.samples[i] = (active ? p.amplitude * v : 0.0) + p.noise_rms * rng.normal();
  }
  c.source_id = "voice" + std::to_string(p.base_f0);
  return c;
}

/// Instantaneous f0 of `voice(p, ...)` at time t (0 inside the silent edges).
inline double voice_f0_at(const VoiceParams& p, double t) {
  if (t < p.edge_silence || t > p.seconds - p.edge_silence) return 0.0;
  const double semis = p.glide_semitones * t / std::max(p.seconds, 1e-9);
  return p.base_f0 * std::pow(2.0, semis / 12.0);
}

/// Random parameters for a toy singing clip.
inline VoiceParams random_voice(Rng& rng, double seconds) {
  VoiceParams p;
  p.seconds = seconds;
  p.base_f0 = rng.uniform(180.0, 480.0);
  p.glide_semitones = rng.uniform(-3.0, 3.0);
  p.vibrato_hz = rng.uniform(4.0, 6.0);
  p.vibrato_cents = rng.uniform(10.0, 40.0);
  p.amplitude = rng.uniform(0.25, 0.45);
  p.noise_rms = 0.002;
  return p;
}

/// Chord pad plus noise-burst percussion: a stand-in for accompaniment.
inline AudioClip accompaniment(double seconds, Rng& rng, int rate = kCanonicalRate) {
  AudioClip c;
  c.sample_rate = rate;
  const std::size_t n = static_cast<std::size_t>(std::llround(seconds * rate));
  c.samples.assign(n, 0.0);
  const double root = rng.uniform(110.0, 220.0);
  const double ratios[3] = {1.0, std::pow(2.0, 4.0 / 12.0), std::pow(2.0, 7.0 / 12.0)};
  for (double r : ratios) {
    const double f = root * r;
    const double ph = rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / rate;
      c.samples[i] += 0.12 * (std::sin(2 * std::numbers::pi * f * t + ph) + 0.4 * std::sin(4 * std::numbers::pi * f * t + ph));
    }
  }
  const double beat = rng.uniform(0.35, 0.6);
  double lp = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate;
    const double since = std::fmod(t, beat);
    const double env = std::exp(-since * 30.0);
    lp = 0.7 * lp + 0.3 * rng.normal();
    c.samples[i] += 0.25 * env * lp;
  }
  c.source_id = "bgm";
  return c;
}

/// Writes a stems-layout corpus (`<root>/<song>/{vocals,accompaniment}.wav`).
inline void write_stems_corpus(const std::filesystem::path& root, std::size_t songs, double seconds,
                               std::uint64_t seed) {
  Rng rng(seed);
  for (std::size_t s = 0; s < songs; ++s) {
    char name[32];
    std::snprintf(name, sizeof name, "song%03zu", s);
    const auto dir = root / name;
    const AudioClip v = voice(random_voice(rng, seconds), rng);
    const AudioClip b = accompaniment(seconds, rng);
    wav::write_pcm16(dir / "vocals.wav", v.samples, v.sample_rate);
    wav::write_pcm16(dir / "accompaniment.wav", b.samples, b.sample_rate);
  }
}

/// Writes a clean-vocal corpus (`<root>/<singer>/<take>.wav`). Each singer
/// gets a characteristic register and overtone colour.
inline void write_clean_corpus(const std::filesystem::path& root, const std::vector<std::string>& singers,
                               std::size_t takes_per_singer, double seconds, std::uint64_t seed) {
  Rng rng(seed);
  for (const auto& singer : singers) {
    const double register_shift = rng.uniform(-0.3, 0.3);
    const std::vector<double> colour = {rng.uniform(0.1, 0.5), rng.uniform(0.0, 0.3)};
    for (std::size_t k = 0; k < takes_per_singer; ++k) {
      VoiceParams p = random_voice(rng, seconds);
      p.base_f0 *= std::pow(2.0, register_shift);
      p.overtones = colour;
      p.amplitude = 0.3;
      const AudioClip v = voice(p, rng);
      char name[32];
      std::snprintf(name, sizeof name, "take%03zu.wav", k);
      wav::write_pcm16(root / singer / name, v.samples, v.sample_rate);
    }
  }
}

}  // namespace melsvc::synth
