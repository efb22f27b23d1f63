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

#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "melsvc/dsp/features.hpp"
#include "melsvc/data/ingest.hpp"
#include "melsvc/dsp/mix.hpp"
#include "melsvc/synth/toy.hpp"

using namespace melsvc;
using namespace melsvc::dsp;

namespace {

std::size_t dominant_bin(const std::vector<double>& x, std::size_t n_fft) {
  std::vector<double> frame(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(n_fft));
  const Eigen::MatrixXcd s = stft(std::span<const double>(frame), n_fft, n_fft, Window::hann);
  Eigen::Index best;
  s.row(0).cwiseAbs().maxCoeff(&best);
  return static_cast<std::size_t>(best);
}

AudioClip scaled(AudioClip c, double k) {
  for (double& v : c.samples) v *= k;
  return c;
}

AudioClip with_power(AudioClip c, double target) {
  const double k = std::sqrt(target / mean_power(c.samples));
  return scaled(std::move(c), k);
}

}  // namespace

TEST(Stft, SinePeaksAtNearestBinInEveryFrame) {
  const auto s = stft(synth::sine(1000.0, 0.5), 800, 160, Window::hann);
  for (Eigen::Index t = 0; t < s.rows(); ++t) {
    Eigen::Index best;
    s.row(t).cwiseAbs().maxCoeff(&best);
    EXPECT_EQ(best, 50);  // 1000 Hz / (16000 / 800)
  }
}

TEST(Stft, ZeroAndImpulse) {
  const auto z = stft(synth::silence(0.2), 800, 160, Window::hann);
  EXPECT_EQ(z.cwiseAbs().maxCoeff(), 0.0);
  std::vector<double> impulse(1600, 0.0);
  impulse[0] = 1.0;
  const auto s = stft(std::span<const double>(impulse), 800, 160, Window::rectangular);
  for (Eigen::Index k = 0; k < s.cols(); ++k) EXPECT_NEAR(std::abs(s(0, k)), 1.0, 1e-12);
}

TEST(Stft, ParsevalForRectangularWindow) {
  Rng rng(4);
  const auto x = synth::white_noise(0.3, 0.3, rng);
  const std::size_t n = 800;
  const auto s = stft(x, n, 160, Window::rectangular);
  for (Eigen::Index t = 0; t < s.rows(); ++t) {
    double time_energy = 0.0;
    for (std::size_t i = 0; i < n; ++i) time_energy += std::pow(x.samples[t * 160 + i], 2);
    double freq_energy = std::norm(s(t, 0)) + std::norm(s(t, n / 2));
    for (std::size_t k = 1; k < n / 2; ++k) freq_energy += 2.0 * std::norm(s(t, static_cast<Eigen::Index>(k)));
    freq_energy /= static_cast<double>(n);
    EXPECT_NEAR(freq_energy / time_energy, 1.0, 1e-6);
  }
}

TEST(Stft, Errors) {
  EXPECT_THROW(stft(synth::silence(0.01), 800, 160, Window::hann), Error);
  EXPECT_THROW(stft(synth::silence(0.1), 100, 160, Window::hann), Error);
}

TEST(Mel, OneSecondHas96Frames) {
  const auto m = mel_spectrogram(synth::sine(440, 1.0));
  EXPECT_EQ(m.frames.rows(), 96);
  EXPECT_EQ(m.frames.cols(), 80);
  EXPECT_DOUBLE_EQ(m.frame_size_ms, 50.0);
  EXPECT_DOUBLE_EQ(m.hop_ms, 10.0);
  EXPECT_TRUE(m.frames.allFinite());
}

TEST(Mel, SilenceIsFloor) {
  const auto m = mel_spectrogram(synth::silence(0.5));
  EXPECT_TRUE((m.frames.array() == std::log(1e-5)).all());
}

TEST(Mel, DoublingAmplitudeAddsLog2AboveFloor) {
  Rng rng(2);
  const AudioClip x = synth::white_noise(0.4, 0.1, rng);
  const auto a = mel_spectrogram(x).frames;
  const auto b = mel_spectrogram(scaled(x, 2.0)).frames;
  int checked = 0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a(i) > std::log(1e-5)) {
      EXPECT_NEAR(b(i) - a(i), std::log(2.0), 1e-9);
      ++checked;
    }
  }
  EXPECT_GT(checked, 1000);
}

TEST(Mel, FilterbankTrianglesHaveUnitAreaScale) {
  const MelConfig cfg;
  const auto fb = mel_filterbank(cfg);
  EXPECT_EQ(fb.rows(), 80);
  EXPECT_EQ(fb.cols(), 401);
  EXPECT_GE(fb.minCoeff(), 0.0);
  for (Eigen::Index m = 0; m < fb.rows(); ++m) EXPECT_GT(fb.row(m).sum(), 0.0);
  EXPECT_NEAR(mel_to_hz(hz_to_mel(3210.0)), 3210.0, 1e-9);
}

TEST(Energy, SilenceStationarityLinearity) {
  for (double v : rms_energy(synth::silence(0.5)).values) EXPECT_EQ(v, 0.0);
  const AudioClip s = synth::sine(330.0, 1.0, 0.3);
  const auto e = rms_energy(s).values;
  ASSERT_EQ(e.size(), 96u);
  for (std::size_t t = 1; t + 1 < e.size(); ++t) EXPECT_NEAR(e[t] / e[48], 1.0, 0.01);
  const auto e2 = rms_energy(scaled(s, 2.0)).values;
  for (std::size_t t = 0; t < e.size(); ++t) EXPECT_NEAR(e2[t] / e[t], 2.0, 2e-6);
}

TEST(Mix, GainForEqualPowerCases) {
  Rng rng(8);
  const AudioClip v = with_power(synth::sine(300, 0.5, 0.3), 0.02);
  const AudioClip b = with_power(synth::white_noise(0.5, 0.1, rng), 0.02);
  EXPECT_NEAR(mix_at_snr_detailed(v, b, 0.0).gain, 1.0, 1e-12);
  EXPECT_NEAR(mix_at_snr_detailed(v, b, 20.0).gain, 0.1, 1e-12);
}

TEST(Mix, UnitPowerSineAndQuarterPowerNoiseAtSixDb) {
  // Hand computation: SNR of unit power over 0.25 * g^2 with g = 1.
  const double snr_for_unit_gain = 10.0 * std::log10(1.0 / (0.25 * 1.0 * 1.0));
  EXPECT_NEAR(snr_for_unit_gain, 6.0206, 1e-4);
  Rng rng(3);
  const AudioClip v = with_power(synth::sine(440, 1.0, 1.0), 1.0);
  const AudioClip b = with_power(synth::white_noise(1.0, 0.5, rng), 0.25);
  const auto r = mix_at_snr_detailed(v, b, 6.0206);
  EXPECT_NEAR(r.gain, 1.0, 1e-4);
  // The tone peaks at sqrt(2), so both parts are rescaled jointly.
  EXPECT_LT(r.scale, 1.0);
  EXPECT_LE(peak_abs(r.mixture.samples), 1.0 + 1e-12);
  std::vector<double> vocal_part(v.samples);
  for (double& x : vocal_part) x *= r.scale;
  EXPECT_NEAR(snr_db(vocal_part, r.noise), 6.0206, 1e-9);
}

TEST(Mix, SnrRoundTripProperty) {
  Rng rng(21);
  for (int trial = 0; trial < 60; ++trial) {
    const double target = rng.uniform(-10.0, 30.0);
    AudioClip v = synth::voice(synth::random_voice(rng, rng.uniform(0.2, 0.6)), rng);
    AudioClip b = synth::accompaniment(rng.uniform(0.1, 1.0), rng);
    const auto r = mix_at_snr_detailed(v, b, target);
    ASSERT_EQ(r.mixture.size(), v.size());
    std::vector<double> vocal_part(v.samples);
    for (double& x : vocal_part) x *= r.scale;
    EXPECT_NEAR(snr_db(vocal_part, r.noise), target, 0.1);
    for (std::size_t i = 0; i < v.size(); ++i) ASSERT_NEAR(r.mixture.samples[i], vocal_part[i] + r.noise[i], 1e-12);
  }
}

TEST(Mix, DegenerateInputs) {
  const AudioClip v = synth::sine(300, 0.2);
  try {
    mix_at_snr(v, synth::silence(0.2), 5.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "degenerate-noise");
  }
  try {
    mix_at_snr(synth::silence(0.2), v, 5.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "degenerate-signal");
  }
}

TEST(Mix, ShortBgmIsLooped) {
  const auto fitted = fit_length(std::vector<double>{1, 2, 3}, 7);
  EXPECT_EQ(fitted, (std::vector<double>{1, 2, 3, 1, 2, 3, 1}));
  const auto cropped = fit_length(std::vector<double>{1, 2, 3, 4, 5}, 2, 2);
  EXPECT_EQ(cropped, (std::vector<double>{3, 4}));
}

TEST(Augment, ProbabilityZeroAndForcedBranch) {
  Rng rng(1);
  const AudioClip v = synth::sine(300, 0.2);
  const std::vector<AudioClip> pool{synth::accompaniment(0.5, rng)};
  for (int i = 0; i < 20; ++i) {
    const auto a = apply_bgm_augmentation(v, pool, 0.0, {}, rng);
    EXPECT_FALSE(a.augmented);
    EXPECT_EQ(a.clip.samples, v.samples);
  }
  const std::vector<AudioClip> silent{synth::silence(0.5)};
  try {
    apply_bgm_augmentation(v, silent, 1.0, {}, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "pool");
  }
  EXPECT_THROW(apply_bgm_augmentation(v, {}, 1.0, {}, rng), Error);
}

TEST(Augment, RateConcentratesAtHalf) {
  Rng rng(2024);
  const AudioClip v = make_clip({0.1, -0.2, 0.3, 0.1});
  const std::vector<AudioClip> pool{make_clip({0.5, 0.4, -0.3})};
  int hits = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto a = apply_bgm_augmentation(v, pool, 0.5, {0.0, 15.0}, rng);
    hits += a.augmented;
    if (a.augmented) {
      EXPECT_GE(a.snr_db, 0.0);
      EXPECT_LT(a.snr_db, 15.0);
    }
  }
  EXPECT_GE(hits / 10000.0, 0.49);
  EXPECT_LE(hits / 10000.0, 0.51);
}

TEST(Augment, ReproducibleUnderSeed) {
  Rng seed_rng(5);
  const AudioClip v = synth::sine(300, 0.3);
  const std::vector<AudioClip> pool{synth::accompaniment(1.0, seed_rng), synth::accompaniment(0.2, seed_rng)};
  Rng a(99), b(99);
  for (int i = 0; i < 10; ++i) {
    const auto x = apply_bgm_augmentation(v, pool, 0.5, {}, a);
    const auto y = apply_bgm_augmentation(v, pool, 0.5, {}, b);
    EXPECT_EQ(x.clip.samples, y.clip.samples);
  }
}

TEST(Speed, IdentityLengthAndPitch) {
  const AudioClip s = synth::sine(440, 1.0, 0.5);
  EXPECT_EQ(speed_perturb(s, 1.0).samples, s.samples);
  EXPECT_NEAR(static_cast<double>(speed_perturb(s, 1.25).size()), 12800.0, 1.0);
  const AudioClip fast = speed_perturb(s, 1.5);
  // 8000-point DFT: 2 Hz bins, 660 Hz at bin 330.
  const auto bin = dominant_bin(fast.samples, 8000);
  EXPECT_NEAR(static_cast<double>(bin), 330.0, 1.0);
  EXPECT_THROW(speed_perturb(s, 0.0), Error);
  EXPECT_THROW(speed_perturb(s, -1.0), Error);
}

TEST(Speed, InverseRateRestoresDuration) {
  Rng rng(6);
  for (double r : {0.9, 1.1, 1.25, 1.5}) {
    const AudioClip x = synth::voice(synth::random_voice(rng, 0.7), rng);
    const AudioClip back = speed_perturb(speed_perturb(x, r), 1.0 / r);
    EXPECT_LE(std::abs(static_cast<long>(back.size()) - static_cast<long>(x.size())), 2);
  }
}
