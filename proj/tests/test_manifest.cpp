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

#include <gtest/gtest.h>

#include "melsvc/data/loader.hpp"
#include "melsvc/data/manifest.hpp"
#include "melsvc/synth/toy.hpp"
#include "test_support.hpp"

using namespace melsvc;

namespace {

void write_tiny(const std::filesystem::path& p) { wav::write_pcm16(p, std::vector<double>(160, 0.1), 16000); }

void make_stems(const std::filesystem::path& root, int songs) {
  for (int s = 0; s < songs; ++s) {
    const auto dir = root / ("song" + std::to_string(1000 + s));
    write_tiny(dir / "vocals.wav");
    write_tiny(dir / "accompaniment.wav");
  }
}

void make_clean(const std::filesystem::path& root, int singers, int takes) {
  for (int s = 0; s < singers; ++s) {
    for (int k = 0; k < takes; ++k) write_tiny(root / ("singer" + std::to_string(s)) / ("t" + std::to_string(k) + ".wav"));
  }
}

[[maybe_unused]] std::map<Split, int> count(const std::vector<ManifestEntry>& m) {
  std::map<Split, int> c;
  for (const auto& e : m) c[e.split]++;
  return c;
}

}  // namespace

TEST(Manifest, StemCorpusSplits100_35_15) {
  test::TempDir dir;
  make_stems(dir.path(), 150);
  DatasetSpec spec;
  spec.seed = 7;
  spec.split_ratios = {{Split::train, 100.0 / 150}, {Split::valid, 35.0 / 150}, {Split::test, 15.0 / 150}};
  const auto m = build_manifest(dir.path(), CorpusLayout::stems, spec);
  const auto c = count(m);
  EXPECT_EQ(c.at(Split::train), 100);
  EXPECT_EQ(c.at(Split::valid), 35);
  EXPECT_EQ(c.at(Split::test), 15);
  for (const auto& e : m) EXPECT_TRUE(e.bgm_path.has_value());
}

TEST(Manifest, CleanCorpusNineToOne) {
  test::TempDir dir;
  make_clean(dir.path(), 2, 5);
  DatasetSpec spec;
  spec.split_ratios = {{Split::train, 0.9}, {Split::valid, 0.1}};
  const auto c = count(build_manifest(dir.path(), CorpusLayout::clean_vocals, spec));
  EXPECT_EQ(c.at(Split::train), 9);
  EXPECT_EQ(c.at(Split::valid), 1);
}

TEST(Manifest, EmptyCorpusWarns) {
  test::TempDir dir;
  log::ScopedCapture capture;
  const auto m = build_manifest(dir.path(), CorpusLayout::clean_vocals, DatasetSpec{});
  EXPECT_TRUE(m.empty());
  ASSERT_EQ(capture.warnings.size(), 1u);
}

TEST(Manifest, DeterministicUnderSeedAndSensitiveToIt) {
  test::TempDir dir;
  make_stems(dir.path(), 30);
  DatasetSpec spec;
  spec.seed = 11;
  spec.split_ratios = {{Split::train, 0.6}, {Split::valid, 0.2}, {Split::test, 0.2}};
  const auto a = build_manifest(dir.path(), CorpusLayout::stems, spec);
  const auto b = build_manifest(dir.path(), CorpusLayout::stems, spec);
  EXPECT_EQ(a, b);
  spec.seed = 12;
  EXPECT_NE(a, build_manifest(dir.path(), CorpusLayout::stems, spec));
}

TEST(Manifest, HeldOutSingersOnlyInTest) {
  test::TempDir dir;
  make_clean(dir.path(), 8, 4);
  DatasetSpec spec;
  spec.seed = 3;
  spec.held_out_singers = 4;
  const auto m = build_manifest(dir.path(), CorpusLayout::clean_vocals, spec);
  std::set<std::string> test_singers, other_singers;
  for (const auto& e : m) (e.split == Split::test ? test_singers : other_singers).insert(e.singer_id);
  EXPECT_EQ(test_singers.size(), 4u);
  for (const auto& s : test_singers) EXPECT_FALSE(other_singers.contains(s));
}

TEST(Manifest, HeldOutSingerLeakIsRejected) {
  test::TempDir dir;
  make_clean(dir.path(), 3, 2);
  DatasetSpec spec;
  spec.seed = 5;
  spec.held_out_singers = 1;
  const auto m = build_manifest(dir.path(), CorpusLayout::clean_vocals, spec);
  std::string held;
  for (const auto& e : m) if (e.split == Split::test) held = e.singer_id;
  ManifestEntry leak;
  leak.vocal_path = (dir.path() / "extra.wav").string();
  leak.singer_id = held;
  leak.split = Split::train;
  spec.entries = {leak};
  try {
    build_manifest(dir.path(), CorpusLayout::clean_vocals, spec);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "manifest-consistency");
  }
}

TEST(Manifest, TestPathNeverInTrainAndInSetIsOneSinger) {
  ManifestEntry a{"x.wav", std::nullopt, "s1", Split::test, Role::extractor_corpus};
  ManifestEntry b = a;
  b.split = Split::train;
  EXPECT_THROW(check_manifest_consistency({a, b}), Error);
  ManifestEntry c{"c.wav", std::nullopt, "target", Split::train, Role::in_set};
  ManifestEntry d{"d.wav", std::nullopt, "other", Split::train, Role::in_set};
  EXPECT_THROW(check_manifest_consistency({c, d}), Error);
  d.singer_id = "target";
  EXPECT_NO_THROW(check_manifest_consistency({c, d}));
}

TEST(Manifest, RatiosMustSumToOne) {
  EXPECT_THROW(split_counts(10, {{Split::train, 0.5}, {Split::valid, 0.4}}), Error);
  EXPECT_NO_THROW(split_counts(10, {{Split::train, 0.5}, {Split::valid, 0.5 + 1e-12}}));
}

TEST(Manifest, SplitCountsAlwaysPartitionN) {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const double a = rng.uniform(), b = rng.uniform() * (1 - a);
    const std::size_t n = rng.below(500);
    const auto c = split_counts(n, {{Split::train, a}, {Split::valid, b}, {Split::test, 1 - a - b}});
    EXPECT_EQ(c.at(Split::train) + c.at(Split::valid) + c.at(Split::test), n);
    EXPECT_LE(std::abs(static_cast<double>(c.at(Split::train)) - a * n), 1.0);
  }
}

TEST(Manifest, JsonlRoundTripPreservesEntries) {
  test::TempDir dir;
  make_stems(dir.path() / "c", 5);
  DatasetSpec spec;
  spec.split_ratios = {{Split::train, 0.6}, {Split::valid, 0.2}, {Split::test, 0.2}};
  auto m = add_speed_copies(build_manifest(dir.path() / "c", CorpusLayout::stems, spec), {0.9, 1.2});
  write_manifest(dir / "m.jsonl", m);
  EXPECT_EQ(read_manifest(dir / "m.jsonl"), m);
}

TEST(Manifest, SpeedCopiesAreTaggedAndLoadShorter) {
  test::TempDir dir;
  wav::write_pcm16(dir / "v.wav", synth::sine(300, 0.5, 0.3).samples, 16000);
  ManifestEntry e{(dir / "v.wav").string(), std::nullopt, "s", Split::train, Role::in_set};
  const auto m = add_speed_copies({e}, {1.0, 1.25});
  ASSERT_EQ(m.size(), 2u);
  EXPECT_TRUE(m[1].augmented);
  EXPECT_DOUBLE_EQ(m[1].speed, 1.25);
  EXPECT_EQ(load_vocal(m[1]).size(), 6400u);
}

TEST(Manifest, IngestedClipsPassValidator) {
  test::TempDir dir;
  synth::write_stems_corpus(dir.path(), 3, 0.3, 9);
  for (const auto& e : build_manifest(dir.path(), CorpusLayout::stems, DatasetSpec{})) {
    EXPECT_NO_THROW(validate_clip(load_vocal(e)));
    EXPECT_NO_THROW(validate_clip(*load_bgm(e)));
  }
}
