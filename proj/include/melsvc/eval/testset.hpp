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

#include <array>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "melsvc/core/random.hpp"
#include "melsvc/data/loader.hpp"
#include "melsvc/dsp/mix.hpp"

namespace melsvc::eval {

inline constexpr std::array<double, 4> kSnrLevels{0.0, 5.0, 10.0, 15.0};

struct NoisyItem {
  std::string id;
  AudioClip mixture;
  /// Vocal exactly as it appears inside the mixture (mixture = clean + bgm).
  AudioClip clean;
  double snr_db = 0.0;
  std::string bgm_id;
};

struct NoisyTestSet {
  std::vector<NoisyItem> items;
};

/// Item i gets level kSnrLevels[i % 4], so every level holds floor(n/4) or
/// ceil(n/4) items and surplus items go to the lower levels first. BGM clip
/// and offset are drawn from `seed`.
inline NoisyTestSet build_noisy_testset(const std::vector<AudioClip>& clean, const std::vector<AudioClip>& bgm_pool,
                                        std::uint64_t seed) {
  if (bgm_pool.empty()) throw data_error("composition", "noisy test set needs at least one test-split BGM clip");
  Rng rng(derive_seed(seed, 0x7e57));
  NoisyTestSet out;
  out.items.reserve(clean.size());
  for (std::size_t i = 0; i < clean.size(); ++i) {
    const AudioClip& bgm = bgm_pool[rng.below(bgm_pool.size())];
    const std::size_t offset = bgm.size() ? rng.below(bgm.size()) : 0;
    const double snr = kSnrLevels[i % kSnrLevels.size()];
    const auto mix = dsp::mix_at_snr_detailed(clean[i], bgm, snr, offset);
    NoisyItem item;
    item.id = clean[i].source_id.empty() ? "item" + std::to_string(i) : clean[i].source_id;
    item.mixture = mix.mixture;
    item.clean = clean[i];
    for (double& v : item.clean.samples) v *= mix.scale;
    item.snr_db = snr;
    item.bgm_id = bgm.source_id;
    out.items.push_back(std::move(item));
  }
  return out;
}

/// Test-split vocals mixed with test-split BGM only; training BGM never
/// enters the test set.
inline NoisyTestSet build_noisy_testset(const std::vector<ManifestEntry>& entries, std::uint64_t seed) {
  std::vector<AudioClip> vocals, bgm;
  for (const auto& e : entries) {
    if (e.split != Split::test || e.augmented) continue;
    AudioClip v = load_vocal(e);
    v.source_id = e.vocal_path;
    vocals.push_back(std::move(v));
    if (auto b = load_bgm(e)) {
      b->source_id = *e.bgm_path;
      bgm.push_back(std::move(*b));
    }
  }
  if (vocals.size() < kSnrLevels.size()) {
    throw data_error("composition", "noisy test set needs at least 4 test-split clips, found " + std::to_string(vocals.size()));
  }
  return build_noisy_testset(vocals, bgm, seed);
}

/// Layout: <dir>/testset.jsonl with one {id, mixture, clean, snr_db, bgm}
/// record per line; audio under <dir>/mixture/ and <dir>/clean/.
inline void write_testset(const std::filesystem::path& dir, const NoisyTestSet& set) {
  std::filesystem::create_directories(dir);
  std::ofstream index(dir / "testset.jsonl");
  for (std::size_t i = 0; i < set.items.size(); ++i) {
    const auto& it = set.items[i];
    char name[32];
    std::snprintf(name, sizeof name, "%05zu.wav", i);
    write_clip(dir / "mixture" / name, it.mixture);
    write_clip(dir / "clean" / name, it.clean);
    const nlohmann::json rec = {{"id", it.id}, {"mixture", std::string("mixture/") + name},
                                {"clean", std::string("clean/") + name}, {"snr_db", it.snr_db}, {"bgm", it.bgm_id}};
    index << rec.dump() << "\n";
  }
  if (!index) throw data_error("io", "cannot write " + (dir / "testset.jsonl").string());
}

inline NoisyTestSet read_testset(const std::filesystem::path& jsonl) {
  std::ifstream in(jsonl);
  if (!in) throw data_error("io", "cannot read test set " + jsonl.string());
  const auto root = jsonl.parent_path();
  NoisyTestSet set;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    NoisyItem it;
    it.id = j.at("id");
    it.mixture = ingest(root / j.at("mixture").get<std::string>());
    it.clean = ingest(root / j.at("clean").get<std::string>());
    it.snr_db = j.at("snr_db");
    it.bgm_id = j.value("bgm", "");
    set.items.push_back(std::move(it));
  }
  return set;
}

}  // namespace melsvc::eval
