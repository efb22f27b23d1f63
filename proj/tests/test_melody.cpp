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
#include <set>

#include <gtest/gtest.h>

#include "melody_fixtures.hpp"
#include "melsvc/data/ingest.hpp"
#include "test_support.hpp"

using namespace melsvc;
using namespace melsvc::melody;

TEST(Conditions, SevenDistinctNamedCombinations) {
  std::set<std::tuple<bool, bool, bool>> flags;
  for (const auto& c : all_conditions()) flags.insert({c.fine_tune, c.weighted_sum, c.fft_blocks});
  EXPECT_EQ(flags.size(), 7u);
  const auto p = parse_condition("proposed");
  EXPECT_TRUE(p.fine_tune && p.weighted_sum && p.fft_blocks);
  const auto raw = parse_condition("raw single");
  EXPECT_FALSE(raw.fine_tune || raw.weighted_sum || raw.fft_blocks);
  EXPECT_EQ(parse_condition("Weighted-sum w/o FFT"), condition_from_flags(true, true, false));
  EXPECT_THROW(condition_from_flags(true, false, true), Error);
  EXPECT_THROW(parse_condition("everything"), Error);
}

TEST(MelodyModel, OneSecondGivesNinetySixFeatureFrames) {
  MelodyConfig cfg;
  cfg.fft.num_blocks = 1;
  cfg.fft.filter_dim = 64;
  cfg.fft.conv_kernel = 3;
  MelodyModel m(ssl::make_backbone(test::tiny_backbone()), parse_condition("proposed"), cfg, 3);
  const auto [f, p] = m.infer(synth::sine(220.0, 1.0));
  EXPECT_EQ(f.frames.rows(), 96);
  EXPECT_EQ(f.frames.cols(), 256);
  EXPECT_EQ(p.pitch.size(), 96u);
}

TEST(MelodyModel, ZeroInputIsFiniteWithValidVoicing) {
  for (const auto& c : all_conditions()) {
    auto m = test::tiny_model(c.name);
    const auto [f, p] = m->infer(synth::silence(0.3));
    EXPECT_TRUE(f.frames.allFinite()) << c.name;
    for (double v : p.vuv_prob) EXPECT_TRUE(v >= 0.0 && v <= 1.0);
    for (double v : p.pitch) EXPECT_TRUE(std::isfinite(v));
  }
}

TEST(MelodyModel, DeterministicInEvalMode) {
  auto a = test::tiny_model("proposed", 5), b = test::tiny_model("proposed", 5);
  const auto clip = synth::sine(330.0, 0.5);
  EXPECT_TRUE(a->export_features(clip).frames == a->export_features(clip).frames);
  EXPECT_TRUE(a->export_features(clip).frames == b->export_features(clip).frames);
}

TEST(MelodyModelProperty, FeatureFramesMatchMelFramesForRandomLengths) {
  auto m = test::tiny_model("weighted-sum-w-fft");
  Rng rng(9);
  for (int i = 0; i < 25; ++i) {
    const std::size_t n = 800 + rng.below(24000);
    AudioClip c = make_clip(std::vector<double>(n, 0.0));
    for (double& v : c.samples) v = 0.1 * rng.uniform(-1.0, 1.0);
    EXPECT_EQ(static_cast<std::size_t>(m->export_features(c).frames.rows()), dsp::mel_frame_count(n)) << n;
  }
}

TEST(MelodyLoss, ZeroResidualLeavesOnlyVoicingTerm) {
  MelodyTargets t{Eigen::VectorXd(3), Eigen::VectorXd(3), Eigen::VectorXd(3)};
  t.pitch << 0.5, 0.0, -1.0;
  t.voiced << 1, 0, 1;
  t.energy << 0.1, 0.2, 0.3;
  Mat heads(3, 3);
  heads.col(0) = t.pitch;
  heads.col(1) = t.energy;
  heads.col(2) << 0.3, -0.2, 1.5;
  nn::Tape tape;
  LossComponents parts;
  melody_loss(tape.constant(heads), t, MelodyConfig{}, parts);
  EXPECT_EQ(parts.pitch, 0.0);
  EXPECT_EQ(parts.energy, 0.0);
  double bce = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double pr = 1.0 / (1.0 + std::exp(-heads(i, 2)));
    bce -= t.voiced(i) * std::log(pr) + (1 - t.voiced(i)) * std::log(1 - pr);
  }
  EXPECT_NEAR(parts.vuv, bce / 3.0, 1e-12);
  EXPECT_NEAR(parts.total, 0.5 * bce / 3.0, 1e-12);
}

TEST(MelodyLoss, SingleVoicedFrameOffByDelta) {
  MelodyTargets t{Eigen::VectorXd::Zero(4), Eigen::VectorXd::Zero(4), Eigen::VectorXd::Zero(4)};
  t.voiced(2) = 1.0;
  Mat heads = Mat::Zero(4, 3);
  heads(2, 0) = 0.37;
  heads(0, 0) = 9.0;  // unvoiced frame, ignored
  nn::Tape tape;
  LossComponents parts;
  melody_loss(tape.constant(heads), t, MelodyConfig{}, parts);
  EXPECT_NEAR(parts.pitch, 0.37, 1e-15);
}

TEST(MelodyLoss, AllUnvoicedSkipsPitchWithWarning) {
  MelodyTargets t{Eigen::VectorXd::Zero(5), Eigen::VectorXd::Zero(5), Eigen::VectorXd::Constant(5, 1.0)};
  Mat heads = Mat::Constant(5, 3, 0.25);
  log::ScopedCapture cap;
  nn::Tape tape;
  LossComponents parts;
  const auto loss = melody_loss(tape.constant(heads), t, MelodyConfig{}, parts, "quiet");
  EXPECT_TRUE(parts.pitch_skipped);
  EXPECT_EQ(parts.pitch, 0.0);
  EXPECT_TRUE(std::isfinite(loss.scalar()));
  EXPECT_NEAR(parts.total, 0.5 * 0.75 + 0.5 * parts.vuv, 1e-12);
  ASSERT_EQ(cap.warnings.size(), 1u);
  EXPECT_NE(cap.warnings[0].find("quiet"), std::string::npos);
}

TEST(MelodyLoss, PitchGradientIsZeroAtUnvoicedFrames) {
  MelodyTargets t{Eigen::VectorXd::Zero(6), Eigen::VectorXd::Zero(6), Eigen::VectorXd::Zero(6)};
  t.voiced << 1, 0, 1, 0, 0, 1;
  Rng rng(2);
  nn::Parameter h("h", nn::random_normal(6, 3, 1.0, rng));
  MelodyConfig cfg;
  cfg.lambda_energy = 0.0;
  cfg.lambda_vuv = 0.0;
  nn::Tape tape;
  LossComponents parts;
  tape.backward(melody_loss(tape.param(h), t, cfg, parts));
  tape.flush_param_grads();
  for (int i : {1, 3, 4}) EXPECT_EQ(h.grad(i, 0), 0.0);
  for (int i : {0, 2, 5}) EXPECT_NE(h.grad(i, 0), 0.0);
}

TEST(MelodyLoss, LengthSlack) {
  MelodyTargets t{Eigen::VectorXd::Zero(10), Eigen::VectorXd::Ones(10), Eigen::VectorXd::Zero(10)};
  nn::Tape tape;
  LossComponents parts;
  EXPECT_NO_THROW(melody_loss(tape.constant(Mat::Zero(8, 3)), t, MelodyConfig{}, parts));
  try {
    melody_loss(tape.constant(Mat::Zero(7, 3)), t, MelodyConfig{}, parts, "clipX");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "alignment");
    EXPECT_NE(std::string(e.what()).find("clipX"), std::string::npos);
  }
}

namespace {

TrainConfig quick_train(long steps) {
  TrainConfig c;
  c.steps = steps;
  c.batch_size = 2;
  c.crop_seconds = 0.3;
  c.optimizer.lr = 1e-3;
  c.log_every = 10;
  c.seed = 4;
  return c;
}

}  // namespace

TEST(MelodyTraining, RawConditionsLeaveBackboneUntouched) {
  const auto items = test::toy_items(4, 0.4, 1);
  const auto bgm = test::toy_bgm(2, 1.0, 2);
  for (const char* name : {"raw-single", "raw-weighted-sum"}) {
    auto m = test::tiny_model(name);
    const auto backbone_before = m->backbone().digest();
    const auto logits_before = nn::parameter_digest({&m->layer_weights().logits});
    const auto head_before = nn::parameter_digest(m->head_params());
    auto handle = ssl::make_handle(m->backbone().model_id(), false);
    train_melody(*m, items, bgm, quick_train(15), handle);
    EXPECT_EQ(m->backbone().digest(), backbone_before) << name;
    EXPECT_TRUE(m->fft_params().empty());
    EXPECT_NE(nn::parameter_digest(m->head_params()), head_before) << "projection trains";
    const bool logits_changed = nn::parameter_digest({&m->layer_weights().logits}) != logits_before;
    EXPECT_EQ(logits_changed, std::string(name) == "raw-weighted-sum") << name;
  }
}

TEST(MelodyTraining, FineTuneFreezesAtScheduledStep) {
  const auto items = test::toy_items(3, 0.3, 3);
  auto m = test::tiny_model("proposed");
  auto cfg = quick_train(12);
  cfg.bgm_prob = 0.0;
  cfg.freeze_step = 6;
  std::vector<std::string> digests;
  auto handle = ssl::make_handle(m->backbone().model_id(), true, cfg.freeze_step);
  const auto initial = m->backbone().digest();
  train_melody(*m, items, {}, cfg, handle, [&](long, MelodyModel& mm) { digests.push_back(mm.backbone().digest()); });
  ASSERT_EQ(digests.size(), 12u);
  EXPECT_NE(digests[0], initial);
  EXPECT_NE(digests[5], digests[4]);
  for (std::size_t i = 6; i < 12; ++i) EXPECT_EQ(digests[i], digests[5]);
  EXPECT_EQ(*handle.frozen_at, 6);
  EXPECT_EQ(*handle.frozen_digest, digests.back());
}

TEST(MelodyTraining, LossDecreasesOnToyCorpus) {
  const auto items = test::toy_items(20, 0.5, 5);
  const auto bgm = test::toy_bgm(3, 2.0, 6);
  auto m = test::tiny_model("proposed");
  auto handle = ssl::make_handle(m->backbone().model_id(), true);
  auto cfg = quick_train(200);
  const auto h = train_melody(*m, items, bgm, cfg, handle);
  auto window_mean = [&](std::size_t from) {
    double s = 0.0;
    for (std::size_t i = from; i < from + 25; ++i) s += h.losses[i].loss.total;
    return s / 25.0;
  };
  EXPECT_LT(window_mean(175), window_mean(0));
  EXPECT_LT(window_mean(100), window_mean(0));
  for (const auto& w : h.weights) {
    double s = 0.0;
    for (double v : w.effective) s += v;
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
}

TEST(MelodyTraining, LabelFrameMismatchNamesClip) {
  auto items = test::toy_items(1, 0.3, 7);
  items[0].label = FrameTrack::unvoiced(items[0].label.size() + 5);
  auto m = test::tiny_model("proposed");
  auto handle = ssl::make_handle(m->backbone().model_id(), true);
  try {
    train_melody(*m, items, {}, quick_train(1), handle);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "alignment");
    EXPECT_NE(std::string(e.what()).find("toy0"), std::string::npos);
  }
}

TEST(MelodyCheckpoint, RoundTripReproducesPredictions) {
  test::TempDir dir;
  const auto items = test::toy_items(2, 0.3, 8);
  auto m = test::tiny_model("proposed");
  auto handle = ssl::make_handle(m->backbone().model_id(), true);
  auto cfg = quick_train(3);
  cfg.bgm_prob = 0.0;
  const auto h = train_melody(*m, items, {}, cfg, handle);
  save_melody_checkpoint(dir / "m.ckpt", *m, test::tiny_backbone(), handle, h);
  auto loaded = load_melody_checkpoint(dir / "m.ckpt");
  EXPECT_EQ(loaded.model->condition().name, "proposed");
  const auto clip = items[0].clip;
  EXPECT_TRUE(loaded.model->export_features(clip).frames == m->export_features(clip).frames);
  EXPECT_EQ(weight_history(loaded.metadata).size(), h.weights.size());
  EXPECT_EQ(loaded.model->predict_track(clip), m->predict_track(clip));
}

TEST(MelodyCheckpoint, BackboneMismatchIsCompatibilityError) {
  test::TempDir dir;
  auto m = test::tiny_model("raw-single");
  auto handle = ssl::make_handle(m->backbone().model_id(), false);
  auto other = test::tiny_backbone();
  other.stub.dim = 8;  // recorded config disagrees with the stored tensors
  save_melody_checkpoint(dir / "m.ckpt", *m, other, handle, TrainHistory{{}, {{0, {0.5, 0.5}}}});
  try {
    load_melody_checkpoint(dir / "m.ckpt");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "compatibility");
  }
  EXPECT_THROW(load_melody_checkpoint(dir / "missing.ckpt"), Error);
}

TEST(MelodyExport, FeatureFileCarriesSourceHash) {
  test::TempDir dir;
  auto m = test::tiny_model("single-w-fft");
  const auto clip = synth::sine(250.0, 1.0);
  write_features(dir / "f.mat", m->export_features(clip), clip);
  const auto f = read_matrix_file(dir / "f.mat");
  EXPECT_EQ(f.source_hash, clip.content_hash());
  EXPECT_EQ(f.values.rows(), 96);
}
