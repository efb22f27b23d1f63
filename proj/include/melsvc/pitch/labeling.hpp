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
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "melsvc/core/log.hpp"
#include "melsvc/core/parallel.hpp"
#include "melsvc/data/loader.hpp"
#include "melsvc/data/manifest.hpp"
#include "melsvc/dsp/features.hpp"
#include "melsvc/pitch/extractors.hpp"
#include "melsvc/pitch/fusion.hpp"

namespace melsvc::pitch {

using ExtractorSet = std::vector<std::shared_ptr<const PitchExtractor>>;

/// Runs three trackers on a clean clip, snaps them to the mel grid and fuses.
inline FrameTrack fused_label(const AudioClip& clip, const ExtractorSet& extractors) {
  if (extractors.size() != 3) throw config_error("extractors", "label fusion needs exactly three extractors");
  const dsp::MelConfig grid;
  const std::size_t frames = dsp::mel_frame_count(clip.size(), grid);
  std::array<FrameTrack, 3> tracks;
  for (std::size_t i = 0; i < 3; ++i) {
    tracks[i] = snap_to_grid(extractors[i]->extract(clip), grid.hop_samples, frames);
  }
  FrameTrack fused = median_fuse(tracks);
  validate_track(fused, frames);
  return fused;
}

/// The labeller used by metrics: median fusion of the built-in trackers.
inline std::function<FrameTrack(const AudioClip&)> default_labeler() {
  auto set = std::make_shared<ExtractorSet>(default_extractors());
  return [set](const AudioClip& clip) { return fused_label(clip, *set); };
}

inline constexpr int kLabelSchemaVersion = 1;

/// One JSON file per clip, keyed by the content hash of the source audio.
/// Writes go through a temporary file and a rename, so concurrent readers
/// never observe partial records.
class LabelCache {
 public:
  explicit LabelCache(std::filesystem::path dir) : dir_(std::move(dir)) { std::filesystem::create_directories(dir_); }

  std::filesystem::path path_for(const std::string& hash) const { return dir_ / (hash + ".json"); }

  std::optional<FrameTrack> load(const std::string& hash) const {
    const auto p = path_for(hash);
    if (!std::filesystem::exists(p)) return std::nullopt;
    std::ifstream in(p);
    const auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded() || j.value("schema_version", 0) != kLabelSchemaVersion ||
        j.value("source_hash", std::string()) != hash) {
      return std::nullopt;
    }
    FrameTrack t;
    t.hop_samples = j.at("hop_samples").get<std::size_t>();
    t.f0_hz = j.at("f0_hz").get<std::vector<double>>();
    for (int v : j.at("vuv").get<std::vector<int>>()) t.vuv.push_back(v != 0);
    return t;
  }

  void store(const std::string& hash, const FrameTrack& t) const {
    nlohmann::json j;
    j["schema_version"] = kLabelSchemaVersion;
    j["source_hash"] = hash;
    j["hop_samples"] = t.hop_samples;
    j["f0_hz"] = t.f0_hz;
    std::vector<int> vuv(t.vuv.begin(), t.vuv.end());
    j["vuv"] = vuv;
    const auto final_path = path_for(hash);
    auto tmp = final_path;
    tmp += ".tmp";
    {
      std::ofstream out(tmp);
      if (!out) throw data_error("io", "cannot write label " + tmp.string());
      out << j.dump();
    }
    std::filesystem::rename(tmp, final_path);
  }

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

/// Key used for labels of a manifest entry (speed copies are labelled separately).
inline std::string label_key(const ManifestEntry& e) {
  if (e.speed == 1.0) return e.vocal_path;
  return e.vocal_path + "@" + std::to_string(e.speed);
}

struct LabelFailure {
  std::string key;
  std::string reason;
};

struct LabelSet {
  std::map<std::string, FrameTrack> labels;
  std::vector<LabelFailure> failures;
};

/// Labels every entry's clean vocal. Extractor or decoding failures flag the
/// entry and exclude it; nothing is zero-filled.
inline LabelSet label_corpus(const std::vector<ManifestEntry>& manifest, const ExtractorSet& extractors,
                             const LabelCache* cache = nullptr, unsigned workers = 1) {
  std::vector<std::optional<FrameTrack>> results(manifest.size());
  std::vector<std::string> errors(manifest.size());
  parallel_for(manifest.size(), workers, [&](std::size_t i) {
    try {
      const AudioClip clip = load_vocal(manifest[i]);
      const std::string hash = clip.content_hash();
      if (cache) {
        if (auto hit = cache->load(hash)) {
          results[i] = std::move(*hit);
          return;
        }
      }
      FrameTrack t = fused_label(clip, extractors);
      if (cache) cache->store(hash, t);
      results[i] = std::move(t);
    } catch (const std::exception& ex) {
      errors[i] = ex.what();
    }
  });
  LabelSet out;
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    const std::string key = label_key(manifest[i]);
    if (results[i]) {
      out.labels.emplace(key, std::move(*results[i]));
    } else {
      log::warn("labeling failed for " + key + ": " + errors[i]);
      out.failures.push_back({key, errors[i]});
    }
  }
  return out;
}

}  // namespace melsvc::pitch
