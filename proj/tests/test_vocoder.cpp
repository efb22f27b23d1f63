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
#include <fstream>

#include <gtest/gtest.h>

#include "melody_fixtures.hpp"
#include "melsvc/vocoder/bridge.hpp"
#include "melsvc/vocoder/gta.hpp"
#include "test_support.hpp"

using namespace melsvc;
using namespace melsvc::vocoder;

namespace {

double pearson(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const Eigen::ArrayXd x = a.reshaped().array() - a.mean();
  const Eigen::ArrayXd y = b.reshaped().array() - b.mean();
  return (x * y).sum() / std::sqrt((x * x).sum() * (y * y).sum());
}

double dominant_hz(const AudioClip& c) {
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  const std::vector<double> x = c.samples;
  fft.fwd(spec, x);
  std::size_t best = 1;
  for (std::size_t k = 1; k < spec.size() / 2; ++k)
    if (std::abs(spec[k]) > std::abs(spec[best])) best = k;
  return static_cast<double>(best) * c.sample_rate / static_cast<double>(x.size());
}

double rms(const AudioClip& c) {
  double s = 0.0;
  for (double v : c.samples) s += v * v;
  return std::sqrt(s / static_cast<double>(c.size()));
}

std::string file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(Fallback, OutputLengthFollowsGrid) {
  EXPECT_EQ(output_samples(96), 16'000u);
  FallbackConfig fast{.nnls_iterations = 5, .phase_iterations = 2};
  Rng rng(1);
  for (Eigen::Index t : {1, 2, 3, 7, 31, 96}) {
    dsp::MelSpectrogram mel;
    mel.frames = nn::random_normal(t, 80, 1.0, rng).array() - 6.0;
    const AudioClip out = fallback_synthesize(mel, fast);
    EXPECT_EQ(out.size(), output_samples(static_cast<std::size_t>(t)));
    EXPECT_EQ(dsp::mel_frame_count(out.size()), static_cast<std::size_t>(t));
    EXPECT_LE(std::abs(static_cast<double>(out.size()) - 160.0 * t), 800.0);
  }
}

TEST(Fallback, ToneRoundTripKeepsFrequency) {
  const AudioClip tone = synth::sine(440.0, 1.0, 0.5);
  const auto mel = dsp::mel_spectrogram(tone);
  const AudioClip out = synthesize(mel);
  // Width of one mel band around 440 Hz.
  const dsp::MelConfig g;
  const double step = (dsp::hz_to_mel(g.f_max) - dsp::hz_to_mel(g.f_min)) / (g.n_mels + 1);
  const double width = dsp::mel_to_hz(dsp::hz_to_mel(440.0) + step) - 440.0;
  EXPECT_NEAR(dominant_hz(out), 440.0, width);
}

TEST(Fallback, SilenceStaysSilent) {
  dsp::MelSpectrogram mel;
  mel.frames = Eigen::MatrixXd::Constant(50, 80, std::log(1e-5));
  EXPECT_LT(rms(synthesize(mel)), 1e-3);
}

TEST(Fallback, ResynthesisMelCorrelatesOnVoicedTones) {
  Rng rng(3);
  for (int i = 0; i < 3; ++i) {
    const AudioClip v = synth::voice(synth::random_voice(rng, 0.6), rng);
    const auto mel = dsp::mel_spectrogram(v);
    const auto again = dsp::mel_spectrogram(synthesize(mel));
    ASSERT_EQ(again.frames.rows(), mel.frames.rows());
    EXPECT_GE(pearson(mel.frames, again.frames), 0.9);
  }
}

TEST(Fallback, RejectsOffGridMel) {
  dsp::MelSpectrogram mel;
  mel.frames = Eigen::MatrixXd::Zero(10, 64);
  try {
    synthesize(mel);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "grid");
  }
  mel.frames = Eigen::MatrixXd::Zero(10, 80);
  mel.hop_ms = 12.5;
  EXPECT_THROW(synthesize(mel), Error);
}

TEST(ExternalVocoder, FollowsFileContract) {
  test::TempDir dir;
  const AudioClip ref = synth::sine(220.0, 0.5);
  write_clip(dir / "ref.wav", ref);
  // Stand-in vocoder: checks it got a mel file, then copies a fixed waveform.
  const auto script = dir / "voc.sh";
  std::ofstream(script) << "#!/bin/sh\n[ \"$1\" = --mel ] && [ -s \"$2\" ] && [ \"$3\" = --out ] || exit 9\ncp '"
                        << (dir / "ref.wav").string() << "' \"$4\"\n";
  std::filesystem::permissions(script, std::filesystem::perms::owner_all);
  const auto mel = dsp::mel_spectrogram(ref);
  VocoderHandle h{VocoderKind::external_neural, {{"command", script.string()}, {"work_dir", (dir / "work").string()}}};
  const AudioClip out = synthesize(mel, h);
  EXPECT_EQ(out.size(), ref.size());
  EXPECT_EQ(read_matrix_file(dir / "work" / "mel.mat").values.rows(), mel.frames.rows());

  VocoderHandle failing{VocoderKind::external_neural, {{"command", "false"}, {"work_dir", (dir / "w2").string()}}};
  try {
    synthesize(mel, failing);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::stage);
  }
  EXPECT_THROW(synthesize(mel, VocoderHandle{VocoderKind::external_neural, {}}), Error);
  EXPECT_EQ(parse_vocoder_kind("fallback"), VocoderKind::fallback_phase_recovery);
  EXPECT_THROW(parse_vocoder_kind("hifigan"), Error);
}

TEST(GtaExport, PairsAreGridConsistentAndDeterministic) {
  test::TempDir dir;
  Rng rng(5);
  std::vector<ManifestEntry> entries;
  for (int i = 0; i < 3; ++i) {
    const auto path = dir / ("v" + std::to_string(i) + ".wav");
    write_clip(path, synth::voice(synth::random_voice(rng, 0.4), rng));
    entries.push_back({path.string(), std::nullopt, "s", Split::train, Role::in_set});
  }
  entries.push_back({(dir / "missing.wav").string(), std::nullopt, "s", Split::train, Role::in_set});
  entries.push_back({entries[0].vocal_path, std::nullopt, "s", Split::train, Role::out_set});

  svc::SvcConfig cfg;
  cfg.encoder = {.num_blocks = 1, .model_dim = 16, .attention_heads = 2, .conv_kernel = 3, .filter_dim = 16, .dropout = 0.0};
  cfg.decoder = cfg.encoder;
  cfg.melody_input = svc::MelodyInput::raw_pitch_energy;
  svc::Generator g(cfg, 2);
  svc::StubContentProvider content;

  const auto a = gta_export(entries, g, nullptr, content, dir / "a");
  const auto b = gta_export(entries, g, nullptr, content, dir / "b");
  ASSERT_EQ(a.pairs.size(), 3u);
  ASSERT_EQ(a.skipped.size(), 1u);
  EXPECT_EQ(a.skipped[0].vocal_path, entries[3].vocal_path);
  for (const auto& p : a.pairs) {
    const auto pair_dir = dir / "a" / "pairs" / p.clip_hash;
    const auto mel = read_matrix_file(pair_dir / "mel.mat").values;
    const AudioClip audio = ingest(pair_dir / "audio.wav");
    EXPECT_EQ(mel.rows(), p.frames);
    EXPECT_EQ(mel.cols(), 80);
    EXPECT_LE(std::abs(static_cast<double>(audio.size()) - 160.0 * mel.rows()), 800.0);
    EXPECT_EQ(file_bytes(pair_dir / "mel.mat"), file_bytes(dir / "b" / "pairs" / p.clip_hash / "mel.mat"));
    EXPECT_EQ(file_bytes(pair_dir / "audio.wav"), file_bytes(dir / "b" / "pairs" / p.clip_hash / "audio.wav"));
  }
  EXPECT_EQ(file_bytes(dir / "a" / "pairs" / "index.json").size(), file_bytes(dir / "b" / "pairs" / "index.json").size());
}
