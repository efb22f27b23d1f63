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
#include <string>
#include <vector>

#include <json.hpp>

#include "melsvc/core/log.hpp"
#include "melsvc/core/matrix_file.hpp"
#include "melsvc/data/loader.hpp"
#include "melsvc/svc/convert.hpp"

namespace melsvc::vocoder {

struct GtaPair {
  std::string clip_hash;
  std::string vocal_path;
  Eigen::Index frames = 0;
  std::size_t samples = 0;
};

struct GtaSkip {
  std::string vocal_path;
  std::string reason;
};

struct GtaReport {
  std::vector<GtaPair> pairs;
  std::vector<GtaSkip> skipped;
};

/// Ground-truth-aligned vocoder fine-tuning data. For every in-set entry:
///   <root>/pairs/<clip_hash>/mel.mat    SVC reconstruction, T x 80 log-mel
///   <root>/pairs/<clip_hash>/audio.wav  the original waveform
/// plus <root>/pairs/index.json listing pairs and skipped entries. Entries
/// that fail to load or convert are skipped, never fatal.
inline GtaReport gta_export(const std::vector<ManifestEntry>& entries, svc::Generator& g,
                            melody::MelodyModel* extractor, svc::ContentProvider& content,
                            const std::filesystem::path& root, const std::string& expected_melody_sig = {}) {
  GtaReport report;
  const auto pairs_dir = root / "pairs";
  std::filesystem::create_directories(pairs_dir);
  for (const auto& e : entries) {
    if (e.role != Role::in_set) continue;
    try {
      const AudioClip clip = load_vocal(e);
      const auto mel = svc::convert(clip, extractor, content, g, expected_melody_sig);
      GtaPair p{clip.content_hash(), e.vocal_path, mel.frames.rows(), clip.size()};
      const auto dir = pairs_dir / p.clip_hash;
      write_matrix_file(dir / "mel.mat", mel.frames, p.clip_hash);
      write_clip(dir / "audio.wav", clip);
      report.pairs.push_back(std::move(p));
    } catch (const Error& err) {
      log::warn("gta export: skipping " + e.vocal_path + ": " + err.what());
      report.skipped.push_back({e.vocal_path, err.code()});
    }
  }
  nlohmann::json index = {{"pairs", nlohmann::json::array()}, {"skipped", nlohmann::json::array()}};
  for (const auto& p : report.pairs)
    index["pairs"].push_back({{"clip_hash", p.clip_hash}, {"vocal", p.vocal_path}, {"frames", p.frames}, {"samples", p.samples}});
  for (const auto& s : report.skipped) index["skipped"].push_back({{"vocal", s.vocal_path}, {"reason", s.reason}});
  std::ofstream(pairs_dir / "index.json") << index.dump(2) << "\n";
  return report;
}

}  // namespace melsvc::vocoder
