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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "melsvc/core/error.hpp"
#include "melsvc/core/log.hpp"
#include "melsvc/core/random.hpp"
#include "melsvc/data/ingest.hpp"

namespace melsvc {

enum class Split { train, valid, test };
enum class Role { in_set, out_set, extractor_corpus };
enum class CorpusLayout { stems, clean_vocals };

inline constexpr int kManifestSchemaVersion = 1;

inline std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::valid: return "valid";
    case Split::test: return "test";
  }
  return "?";
}
inline std::string to_string(Role r) {
  switch (r) {
    case Role::in_set: return "in_set";
    case Role::out_set: return "out_set";
    case Role::extractor_corpus: return "extractor_corpus";
  }
  return "?";
}
inline Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "valid") return Split::valid;
  if (s == "test") return Split::test;
  throw data_error("manifest", "unknown split '" + s + "'");
}
inline Role parse_role(const std::string& s) {
  if (s == "in_set") return Role::in_set;
  if (s == "out_set") return Role::out_set;
  if (s == "extractor_corpus") return Role::extractor_corpus;
  throw data_error("manifest", "unknown role '" + s + "'");
}
inline CorpusLayout parse_layout(const std::string& s) {
  if (s == "stems") return CorpusLayout::stems;
  if (s == "clean" || s == "clean_vocals") return CorpusLayout::clean_vocals;
  throw config_error("layout", "unknown corpus layout '" + s + "' (expected stems|clean)");
}

struct ManifestEntry {
  std::string vocal_path;
  std::optional<std::string> bgm_path;
  std::string singer_id;
  Split split = Split::train;
  Role role = Role::extractor_corpus;
  /// Playback-speed factor applied at load time; 1.0 for original recordings.
  double speed = 1.0;
  bool augmented = false;

  bool operator==(const ManifestEntry&) const = default;
};

struct DatasetSpec {
  /// Pre-assigned entries merged into the scanned corpus.
  std::vector<ManifestEntry> entries;
  std::uint64_t seed = 0;
  std::map<Split, double> split_ratios{{Split::train, 0.9}, {Split::valid, 0.1}};
  Role role = Role::extractor_corpus;
  /// Singers whose recordings are all held out as test (clean layout only).
  int held_out_singers = 0;
};

inline void check_ratios(const std::map<Split, double>& ratios) {
  double sum = 0.0;
  for (const auto& [split, r] : ratios) {
    if (r < 0.0) throw config_error("split-ratios", "negative split ratio for " + to_string(split));
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw config_error("split-ratios", "split ratios must sum to 1, got " + std::to_string(sum));
  }
}

/// Largest-remainder apportionment of n items over the ratios, in
/// train/valid/test order. Ties go to the earlier split.
inline std::map<Split, std::size_t> split_counts(std::size_t n, const std::map<Split, double>& ratios) {
  check_ratios(ratios);
  std::map<Split, std::size_t> counts;
  std::vector<std::pair<double, Split>> remainders;
  std::size_t assigned = 0;
  for (Split s : {Split::train, Split::valid, Split::test}) {
    const auto it = ratios.find(s);
    const double exact = it == ratios.end() ? 0.0 : it->second * static_cast<double>(n);
    // Guard against 99.99999 -> 99 from floating ratios such as 100/150.
    const auto whole = static_cast<std::size_t>(std::floor(exact + 1e-9));
    counts[s] = whole;
    assigned += whole;
    remainders.emplace_back(exact - static_cast<double>(whole), s);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) counts[remainders[i % 3].second] += 1;
  return counts;
}

/// Throws a manifest-consistency error when a test recording (or held-out
/// singer) leaks into train/valid, or in-set entries span several singers.
inline void check_manifest_consistency(const std::vector<ManifestEntry>& entries,
                                       const std::set<std::string>& held_out_singers = {}) {
  std::set<std::string> test_paths;
  for (const auto& e : entries) {
    if (e.split == Split::test) test_paths.insert(e.vocal_path);
  }
  std::optional<std::string> in_set_singer;
  for (const auto& e : entries) {
    if (e.split != Split::test) {
      if (test_paths.contains(e.vocal_path)) {
        throw data_error("manifest-consistency", "test recording also in " + to_string(e.split) + ": " + e.vocal_path);
      }
      if (held_out_singers.contains(e.singer_id)) {
        throw data_error("manifest-consistency",
                         "held-out test singer '" + e.singer_id + "' appears in " + to_string(e.split));
      }
    }
    if (e.role == Role::in_set) {
      if (in_set_singer && *in_set_singer != e.singer_id) {
        throw data_error("manifest-consistency", "in-set entries span singers '" + *in_set_singer +
                                                     "' and '" + e.singer_id + "'");
      }
      in_set_singer = e.singer_id;
    }
  }
}

namespace detail {

inline std::vector<std::filesystem::path> sorted_children(const std::filesystem::path& dir, bool dirs) {
  std::vector<std::filesystem::path> out;
  for (const auto& it : std::filesystem::directory_iterator(dir)) {
    if (dirs ? it.is_directory() : (it.is_regular_file() && it.path().extension() == ".wav")) {
      out.push_back(it.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline void assign_splits(std::vector<ManifestEntry>& items, const std::map<Split, double>& ratios,
                          Rng& rng) {
  std::vector<std::size_t> order(items.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  const auto counts = split_counts(items.size(), ratios);
  std::size_t k = 0;
  for (Split s : {Split::train, Split::valid, Split::test}) {
    for (std::size_t c = 0; c < counts.at(s); ++c) items[order[k++]].split = s;
  }
}

}  // namespace detail

/// Scans a corpus directory into manifest entries.
///
/// stems layout: `<root>/<song>/vocals.wav` plus `accompaniment.wav` (or
/// `bgm.wav`); each song counts as its own singer.
/// clean layout: `<root>/<singer>/<recording>.wav`.
inline std::vector<ManifestEntry> build_manifest(const std::filesystem::path& corpus_root,
                                                 CorpusLayout layout, const DatasetSpec& spec) {
  check_ratios(spec.split_ratios);
  if (!std::filesystem::is_directory(corpus_root)) {
    throw data_error("layout", "corpus root is not a directory: " + corpus_root.string());
  }
  Rng rng(spec.seed);
  std::vector<ManifestEntry> entries;
  std::set<std::string> held_out;

  if (layout == CorpusLayout::stems) {
    for (const auto& song : detail::sorted_children(corpus_root, true)) {
      ManifestEntry e;
      e.vocal_path = (song / "vocals.wav").string();
      if (!std::filesystem::exists(e.vocal_path)) {
        throw data_error("layout", "stem song without vocals.wav: " + song.string());
      }
      for (const char* name : {"accompaniment.wav", "bgm.wav"}) {
        if (std::filesystem::exists(song / name)) {
          e.bgm_path = (song / name).string();
          break;
        }
      }
      e.singer_id = song.filename().string();
      e.role = spec.role;
      entries.push_back(std::move(e));
    }
    detail::assign_splits(entries, spec.split_ratios, rng);
  } else {
    std::vector<std::string> singers;
    for (const auto& dir : detail::sorted_children(corpus_root, true)) singers.push_back(dir.filename().string());
    if (spec.held_out_singers < 0 || static_cast<std::size_t>(spec.held_out_singers) > singers.size()) {
      throw config_error("held-out", "cannot hold out " + std::to_string(spec.held_out_singers) + " of " +
                                         std::to_string(singers.size()) + " singers");
    }
    std::vector<std::string> shuffled = singers;
    rng.shuffle(shuffled);
    held_out.insert(shuffled.begin(), shuffled.begin() + spec.held_out_singers);

    std::vector<ManifestEntry> pool;
    for (const auto& singer : singers) {
      for (const auto& wav : detail::sorted_children(corpus_root / singer, false)) {
        ManifestEntry e;
        e.vocal_path = wav.string();
        e.singer_id = singer;
        e.role = spec.role;
        if (held_out.contains(singer)) {
          e.split = Split::test;
          entries.push_back(std::move(e));
        } else {
          pool.push_back(std::move(e));
        }
      }
    }
    detail::assign_splits(pool, spec.split_ratios, rng);
    entries.insert(entries.end(), pool.begin(), pool.end());
    std::stable_sort(entries.begin(), entries.end(),
                     [](const auto& a, const auto& b) { return a.vocal_path < b.vocal_path; });
  }

  entries.insert(entries.end(), spec.entries.begin(), spec.entries.end());
  if (entries.empty()) log::warn("corpus " + corpus_root.string() + " is empty; manifest has no entries");
  check_manifest_consistency(entries, held_out);
  return entries;
}

/// Adds tagged speed-perturbed copies of every train entry.
inline std::vector<ManifestEntry> add_speed_copies(const std::vector<ManifestEntry>& entries,
                                                   const std::vector<double>& rates) {
  std::vector<ManifestEntry> out = entries;
  for (const auto& e : entries) {
    if (e.split != Split::train || e.augmented) continue;
    for (double r : rates) {
      if (r == 1.0) continue;
      ManifestEntry copy = e;
      copy.speed = r;
      copy.augmented = true;
      out.push_back(copy);
    }
  }
  return out;
}

inline nlohmann::json to_json(const ManifestEntry& e) {
  nlohmann::json j;
  j["schema_version"] = kManifestSchemaVersion;
  j["vocal_path"] = e.vocal_path;
  j["bgm_path"] = e.bgm_path ? nlohmann::json(*e.bgm_path) : nlohmann::json(nullptr);
  j["singer_id"] = e.singer_id;
  j["split"] = to_string(e.split);
  j["role"] = to_string(e.role);
  j["speed"] = e.speed;
  j["augmented"] = e.augmented;
  return j;
}

inline ManifestEntry entry_from_json(const nlohmann::json& j) {
  if (!j.contains("schema_version") || j["schema_version"].get<int>() != kManifestSchemaVersion) {
    throw data_error("manifest", "unsupported manifest schema version");
  }
  ManifestEntry e;
  e.vocal_path = j.at("vocal_path").get<std::string>();
  if (j.contains("bgm_path") && !j["bgm_path"].is_null()) e.bgm_path = j["bgm_path"].get<std::string>();
  e.singer_id = j.at("singer_id").get<std::string>();
  e.split = parse_split(j.at("split").get<std::string>());
  e.role = parse_role(j.at("role").get<std::string>());
  e.speed = j.value("speed", 1.0);
  e.augmented = j.value("augmented", false);
  return e;
}

inline void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw data_error("io", "cannot write manifest " + path.string());
  for (const auto& e : entries) out << to_json(e).dump() << '\n';
}

inline std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw data_error("io", "cannot read manifest " + path.string());
  std::vector<ManifestEntry> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      entries.push_back(entry_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& ex) {
      throw data_error("manifest", path.string() + ":" + std::to_string(lineno) + ": " + ex.what());
    }
  }
  return entries;
}

}  // namespace melsvc
