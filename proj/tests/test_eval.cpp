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
#include <functional>
#include <limits>
#include <set>

#include <gtest/gtest.h>

#include "melsvc/eval/report.hpp"
#include "melsvc/pitch/labeling.hpp"
#include "melsvc/ssl/weighted_sum.hpp"
#include "melsvc/synth/toy.hpp"
#include "test_support.hpp"

using namespace melsvc;
using namespace melsvc::eval;

namespace {

FrameTrack voiced_track(const std::vector<double>& f0) {
  FrameTrack t = FrameTrack::unvoiced(f0.size());
  for (std::size_t i = 0; i < f0.size(); ++i) {
    t.f0_hz[i] = f0[i];
    t.vuv[i] = f0[i] > 0.0;
  }
  return t;
}

std::vector<double> random_contour(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(100.0, 600.0);
  return v;
}

/// Minimum over every monotone corner-to-corner path, by exhaustive recursion.
/// Path costs are summed from (0, 0) forward.
double brute_force_dtw(const std::vector<double>& a, const std::vector<double>& b) {
  double best = std::numeric_limits<double>::infinity();
  std::function<void(std::size_t, std::size_t, double)> walk = [&](std::size_t i, std::size_t j, double acc) {
    acc = acc + std::abs(a[i] - b[j]);
    if (i + 1 == a.size() && j + 1 == b.size()) {
      best = std::min(best, acc);
      return;
    }
    if (i + 1 < a.size() && j + 1 < b.size()) walk(i + 1, j + 1, acc);
    if (i + 1 < a.size()) walk(i + 1, j, acc);
    if (j + 1 < b.size()) walk(i, j + 1, acc);
  };
  walk(0, 0, 0.0);
  return best;
}

double measured_snr(const NoisyItem& it) {
  std::vector<double> noise(it.mixture.size());
  for (std::size_t i = 0; i < noise.size(); ++i) noise[i] = it.mixture.samples[i] - it.clean.samples[i];
  return dsp::snr_db(it.clean.samples, noise);
}

std::vector<AudioClip> toy_vocals(std::size_t n, Rng& rng, double seconds = 0.3) {
  std::vector<AudioClip> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(synth::voice(synth::random_voice(rng, seconds), rng));
    char id[16];
    std::snprintf(id, sizeof id, "v%03zu", i);
    out.back().source_id = id;
  }
  return out;
}

}  // namespace

TEST(F0Rmse, ZeroForIdenticalAndAffineContours) {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    auto f = random_contour(rng, 3 + rng.below(20));
    const auto src = voiced_track(f);
    EXPECT_EQ(*f0rmse(src, src), 0.0);
    const double a = rng.uniform(0.1, 5.0), b = rng.uniform(-50.0, 50.0);
    for (auto& x : f) x = a * x + b + 60.0;
    EXPECT_LE(*f0rmse(src, voiced_track(f)), 1e-9);
  }
}

TEST(F0Rmse, OppositeRampsGiveOne) {
  EXPECT_DOUBLE_EQ(*f0rmse(voiced_track({100, 200}), voiced_track({200, 100})), 1.0);
}

TEST(F0Rmse, RestrictsToCommonVoicedFrames) {
  const auto a = voiced_track({100, 0, 300, 400});
  const auto b = voiced_track({100, 250, 0, 400});
  EXPECT_DOUBLE_EQ(*f0rmse(a, b), 0.0);  // overlap {0, 3}
  EXPECT_FALSE(f0rmse(voiced_track({100, 0}), voiced_track({0, 200})).has_value());
}

TEST(F0Rmse, BoundedByOne) {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.below(30);
    const double v = *f0rmse(voiced_track(random_contour(rng, n)), voiced_track(random_contour(rng, n)));
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Dtw, MatchesExhaustivePathEnumeration) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = random_contour(rng, 1 + rng.below(8));
    const auto b = random_contour(rng, 1 + rng.below(8));
    const DtwResult r = dtw(a, b);
    EXPECT_EQ(r.cost, brute_force_dtw(a, b));
    // The returned path is monotone, corner-anchored and realises the cost.
    ASSERT_EQ(r.path.front(), std::make_pair(std::size_t{0}, std::size_t{0}));
    ASSERT_EQ(r.path.back(), std::make_pair(a.size() - 1, b.size() - 1));
    double acc = 0.0;
    for (std::size_t k = 0; k < r.path.size(); ++k) {
      acc = acc + std::abs(a[r.path[k].first] - b[r.path[k].second]);
      if (k == 0) continue;
      const auto di = r.path[k].first - r.path[k - 1].first, dj = r.path[k].second - r.path[k - 1].second;
      EXPECT_TRUE((di == 1 && dj == 1) || (di == 1 && dj == 0) || (di == 0 && dj == 1));
    }
    EXPECT_EQ(acc, r.cost);
  }
}

TEST(Dtw, FiveAgainstSeven) {
  Rng rng(4);
  const auto a = random_contour(rng, 5), b = random_contour(rng, 7);
  EXPECT_EQ(dtw(a, b).cost, brute_force_dtw(a, b));
}

TEST(Dtw, TiesPreferTheDiagonal) {
  const auto r = dtw({1.0, 1.0, 1.0}, {1.0, 1.0, 1.0});
  EXPECT_EQ(r.path.size(), 3u);
}

TEST(F0Corr, SelfAndReflection) {
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const auto f = random_contour(rng, 4 + rng.below(30));
    EXPECT_NEAR(*f0corr(voiced_track(f), voiced_track(f)), 1.0, 1e-9);
  }
  // A ramp reflected about its mean in log-f0.
  std::vector<double> up, down;
  for (int i = 0; i < 20; ++i) up.push_back(200.0 * std::exp(0.02 * i));
  double mean = 0.0;
  for (double v : up) mean += std::log(v) / up.size();
  for (double v : up) down.push_back(std::exp(2.0 * mean - std::log(v)));
  EXPECT_NEAR(*f0corr(voiced_track(up), voiced_track(down)), -1.0, 1e-9);
}

TEST(F0Corr, SymmetricForTieFreeEqualLengthInputs) {
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 3 + rng.below(20);
    const auto a = voiced_track(random_contour(rng, n)), b = voiced_track(random_contour(rng, n));
    EXPECT_NEAR(*f0corr(a, b), *f0corr(b, a), 1e-12);
    const double c = *f0corr(a, b);
    EXPECT_GE(c, -1.0);
    EXPECT_LE(c, 1.0);
  }
}

TEST(F0Corr, UndefinedCases) {
  EXPECT_FALSE(f0corr(voiced_track({200}), voiced_track({200, 300})).has_value());
  EXPECT_FALSE(f0corr(voiced_track({200, 200, 200}), voiced_track({200, 300, 250})).has_value());
  EXPECT_TRUE(f0corr(voiced_track({200, 250, 300}), voiced_track({210, 260, 300}), false).has_value());
}

TEST(NoisyTestSet, QuartileCompositionForAllSizes) {
  Rng rng(7);
  const auto pool = toy_vocals(101, rng, 0.07);  // only lengths and ids matter here
  std::vector<AudioClip> bgm{synth::accompaniment(0.5, rng)};
  bgm[0].source_id = "bgm";
  for (std::size_t n = 4; n <= 101; ++n) {
    const std::vector<AudioClip> clips(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n));
    const auto set = build_noisy_testset(clips, bgm, 11);
    std::map<double, std::size_t> counts;
    for (const auto& it : set.items) {
      ++counts[it.snr_db];
      EXPECT_NEAR(measured_snr(it), it.snr_db, 0.1);
    }
    ASSERT_EQ(counts.size(), 4u);
    std::size_t lo = n, hi = 0;
    for (const auto& [level, c] : counts) {
      lo = std::min(lo, c);
      hi = std::max(hi, c);
    }
    EXPECT_LE(hi - lo, 1u) << n;
    if (n == 40) EXPECT_EQ(counts[0.0], 10u);
    if (n == 41) {
      EXPECT_EQ(counts[0.0], 11u);
      EXPECT_EQ(counts[5.0], 10u);
      EXPECT_EQ(counts[15.0], 10u);
    }
  }
}

TEST(NoisyTestSet, DeterministicAndNeedsBgm) {
  Rng rng(8);
  const auto clips = toy_vocals(6, rng);
  const std::vector<AudioClip> bgm{synth::accompaniment(1.0, rng), synth::accompaniment(1.0, rng)};
  const auto a = build_noisy_testset(clips, bgm, 3), b = build_noisy_testset(clips, bgm, 3);
  for (std::size_t i = 0; i < a.items.size(); ++i) EXPECT_EQ(a.items[i].mixture.samples, b.items[i].mixture.samples);
  try {
    build_noisy_testset(clips, {}, 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "composition");
  }
}

TEST(NoisyTestSet, ManifestBuilderUsesTestSplitOnly) {
  test::TempDir dir;
  Rng rng(9);
  std::vector<ManifestEntry> entries;
  for (int i = 0; i < 6; ++i) {
    const auto v = dir / ("v" + std::to_string(i) + ".wav"), b = dir / ("b" + std::to_string(i) + ".wav");
    write_clip(v, synth::voice(synth::random_voice(rng, 0.3), rng));
    write_clip(b, synth::accompaniment(0.5, rng));
    entries.push_back({v.string(), b.string(), "s", i < 4 ? Split::test : Split::train, Role::extractor_corpus});
  }
  const auto set = build_noisy_testset(entries, 1);
  ASSERT_EQ(set.items.size(), 4u);
  for (const auto& it : set.items) {
    EXPECT_TRUE(it.bgm_id.find("b4") == std::string::npos && it.bgm_id.find("b5") == std::string::npos);
  }
  entries.resize(3);
  EXPECT_THROW(build_noisy_testset(entries, 1), Error);

  write_testset(dir / "ts", set);
  const auto back = read_testset(dir / "ts" / "testset.jsonl");
  ASSERT_EQ(back.items.size(), set.items.size());
  EXPECT_EQ(back.items[2].snr_db, set.items[2].snr_db);
  EXPECT_EQ(back.items[2].id, set.items[2].id);
}

TEST(Evaluate, IdentityPipelineIsPerfect) {
  Rng rng(10);
  const auto clips = toy_vocals(8, rng, 0.5);
  const auto set = build_noisy_testset(clips, {synth::accompaniment(1.0, rng)}, 2);
  const auto rep = evaluate([](const NoisyItem& it) { return it.clean; }, set, pitch::default_labeler(), 2);
  EXPECT_EQ(rep.n_clips, 8u);
  for (const auto& it : rep.items) {
    ASSERT_TRUE(it.f0rmse && it.f0corr) << it.id;
    EXPECT_EQ(*it.f0rmse, 0.0);
    EXPECT_NEAR(*it.f0corr, 1.0, 1e-9);
  }
  std::set<double> levels;
  for (const auto& [l, m] : rep.per_snr) levels.insert(l);
  EXPECT_EQ(levels, (std::set<double>{0.0, 5.0, 10.0, 15.0}));
  const auto j = to_json(rep);
  EXPECT_EQ(j["per_snr"].size(), 4u);
  EXPECT_DOUBLE_EQ(j["overall"]["f0rmse"].get<double>(), 0.0);
}

TEST(Evaluate, FailuresAreRecordedAndExcluded) {
  Rng rng(11);
  const auto clips = toy_vocals(4, rng, 0.5);
  const auto set = build_noisy_testset(clips, {synth::accompaniment(1.0, rng)}, 2);
  const auto rep = evaluate(
      [](const NoisyItem& it) {
        if (it.id == "v001") throw stage_error("convert", "boom");
        if (it.id == "v002") return synth::silence(0.5);
        return it.clean;
      },
      set, pitch::default_labeler());
  ASSERT_EQ(rep.failures().size(), 1u);
  EXPECT_EQ(rep.failures()[0]->id, "v001");
  ASSERT_EQ(rep.undefined().size(), 1u);
  EXPECT_EQ(rep.undefined()[0]->id, "v002");
  EXPECT_EQ(rep.overall.n_rmse, 2u);
  EXPECT_EQ(to_json(rep)["failures"].size(), 1u);
}

TEST(LayerWeightReport, SelectionUniformAndCardinality) {
  ssl::LayerWeights one_hot(5, ssl::WeightMode::softmax);
  one_hot.logits.value(0, 2) = 800.0;
  ssl::LayerWeights uniform(13, ssl::WeightMode::softmax);
  auto log_of = [](const ssl::LayerWeights& w) {
    const Eigen::RowVectorXd e = w.effective();
    return std::vector<melody::WeightLog>{{0, {e.data(), e.data() + e.size()}}};
  };
  const auto table = layer_weight_table({{"frozen", log_of(one_hot)}, {"fine-tuned", log_of(uniform)}});
  ASSERT_EQ(table.size(), 2u);
  for (std::size_t l = 0; l < 5; ++l) EXPECT_NEAR(table[0].weights[l], l == 2 ? 1.0 : 0.0, 1e-12);
  for (double w : table[1].weights) EXPECT_NEAR(w, 1.0 / 13.0, 1e-12);
  EXPECT_NEAR(table[1].weights[0], 0.0769, 5e-5);

  const std::string csv = layer_weight_csv(table);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 5 + 13);
  const std::string svg = layer_weight_svg(table);
  EXPECT_NE(svg.find("<svg"), std::string::npos);
  EXPECT_NE(svg.find("fine-tuned"), std::string::npos);

  EXPECT_THROW(layer_weight_table({{"empty", {}}}), Error);
  EXPECT_THROW(layer_weight_table({{"bad", {{0, {0.5, 0.6}}}}}), Error);
}
