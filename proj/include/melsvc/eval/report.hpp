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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "melsvc/core/log.hpp"
#include "melsvc/core/parallel.hpp"
#include "melsvc/eval/metrics.hpp"
#include "melsvc/eval/testset.hpp"
#include "melsvc/melody/trainer.hpp"

namespace melsvc::eval {

inline constexpr const char* kReportVersion = "melsvc-eval/1";

struct LevelMetrics {
  double f0rmse = 0.0;  // mean over items with a defined value
  double f0corr = 0.0;
  std::size_t n_rmse = 0;
  std::size_t n_corr = 0;
};

struct ItemResult {
  std::string id;
  double snr_db = 0.0;
  std::optional<double> f0rmse;
  std::optional<double> f0corr;
  std::optional<std::string> failure;  // conversion or labelling error
};

struct MetricReport {
  LevelMetrics overall;
  std::map<double, LevelMetrics> per_snr;
  std::size_t n_clips = 0;
  std::vector<ItemResult> items;  // sorted by id

  std::vector<const ItemResult*> undefined() const {
    std::vector<const ItemResult*> out;
    for (const auto& it : items)
      if (!it.failure && (!it.f0rmse || !it.f0corr)) out.push_back(&it);
    return out;
  }
  std::vector<const ItemResult*> failures() const {
    std::vector<const ItemResult*> out;
    for (const auto& it : items)
      if (it.failure) out.push_back(&it);
    return out;
  }
};

using ConversionFn = std::function<AudioClip(const NoisyItem&)>;
using PitchLabeler = std::function<FrameTrack(const AudioClip&)>;

namespace detail {

inline void accumulate(LevelMetrics& m, const ItemResult& r) {
  if (r.f0rmse) {
    m.f0rmse += *r.f0rmse;
    ++m.n_rmse;
  }
  if (r.f0corr) {
    m.f0corr += *r.f0corr;
    ++m.n_corr;
  }
}

inline void finish(LevelMetrics& m) {
  if (m.n_rmse) m.f0rmse /= static_cast<double>(m.n_rmse);
  if (m.n_corr) m.f0corr /= static_cast<double>(m.n_corr);
}

}  // namespace detail

using TrackFn = std::function<FrameTrack(const NoisyItem&)>;

/// Source f0 comes from the clean reference; `converted` yields the f0 track
/// of the system under test for the mixture. Failed items are recorded and
/// excluded; items with an undefined metric are excluded from that metric's
/// means only.
inline MetricReport evaluate_tracks(const TrackFn& converted, const NoisyTestSet& set, const PitchLabeler& labeler,
                                    unsigned workers = 1, bool log_f0 = true) {
  std::vector<ItemResult> results(set.items.size());
  parallel_for(set.items.size(), workers, [&](std::size_t i) {
    const NoisyItem& it = set.items[i];
    ItemResult& r = results[i];
    r.id = it.id;
    r.snr_db = it.snr_db;
    try {
      const FrameTrack src = labeler(it.clean);
      const FrameTrack conv = converted(it);
      r.f0rmse = f0rmse(src, conv);
      r.f0corr = f0corr(src, conv, log_f0);
    } catch (const std::exception& e) {
      r.failure = e.what();
    }
  });
  std::stable_sort(results.begin(), results.end(), [](const ItemResult& a, const ItemResult& b) { return a.id < b.id; });
  MetricReport rep;
  rep.n_clips = results.size();
  for (double level : kSnrLevels) rep.per_snr[level];
  for (const auto& r : results) {
    if (r.failure) {
      log::warn("evaluation failed for " + r.id + ": " + *r.failure);
      continue;
    }
    detail::accumulate(rep.overall, r);
    detail::accumulate(rep.per_snr[r.snr_db], r);
  }
  detail::finish(rep.overall);
  for (auto& [level, m] : rep.per_snr) detail::finish(m);
  rep.items = std::move(results);
  return rep;
}

/// Waveform systems: converted f0 is labelled from the system's output audio.
inline MetricReport evaluate(const ConversionFn& convert, const NoisyTestSet& set, const PitchLabeler& labeler,
                             unsigned workers = 1, bool log_f0 = true) {
  return evaluate_tracks([&](const NoisyItem& it) { return labeler(convert(it)); }, set, labeler, workers, log_f0);
}

inline nlohmann::json to_json(const LevelMetrics& m) {
  return {{"f0rmse", m.n_rmse ? nlohmann::json(m.f0rmse) : nlohmann::json()},
          {"f0corr", m.n_corr ? nlohmann::json(m.f0corr) : nlohmann::json()},
          {"n_f0rmse", m.n_rmse},
          {"n_f0corr", m.n_corr}};
}

inline nlohmann::json to_json(const MetricReport& r, const nlohmann::json& provenance = nlohmann::json::object()) {
  nlohmann::json j;
  j["version"] = kReportVersion;
  j["n_clips"] = r.n_clips;
  j["overall"] = to_json(r.overall);
  auto& per = j["per_snr"] = nlohmann::json::object();
  for (const auto& [level, m] : r.per_snr) per[std::to_string(static_cast<int>(level))] = to_json(m);
  auto& und = j["undefined"] = nlohmann::json::array();
  for (const auto* it : r.undefined())
    und.push_back({{"id", it->id}, {"f0rmse", it->f0rmse.has_value()}, {"f0corr", it->f0corr.has_value()}});
  auto& fail = j["failures"] = nlohmann::json::array();
  for (const auto* it : r.failures()) fail.push_back({{"id", it->id}, {"error", *it->failure}});
  j["provenance"] = provenance;
  return j;
}

// ---- layer-weight contribution report ----

struct LayerWeightSeries {
  std::string condition;
  std::vector<double> weights;  // effective weights, layer 0 = front-end output
};

/// Final effective weights of each run. Throws a report error when a run has
/// no history or its weights do not sum to 1.
inline std::vector<LayerWeightSeries> layer_weight_table(
    const std::vector<std::pair<std::string, std::vector<melody::WeightLog>>>& runs) {
  std::vector<LayerWeightSeries> out;
  for (const auto& [name, history] : runs) {
    if (history.empty()) throw data_error("report", "no layer-weight history for " + name);
    const auto& w = history.back().effective;
    double sum = 0.0;
    for (double v : w) sum += v;
    if (w.empty() || std::abs(sum - 1.0) > 1e-6) {
      throw data_error("report", name + ": layer weights sum to " + std::to_string(sum) + ", not 1");
    }
    out.push_back({name, w});
  }
  return out;
}

/// CSV: condition,layer,weight. One row per layer per condition.
inline std::string layer_weight_csv(const std::vector<LayerWeightSeries>& table) {
  std::ostringstream os;
  os << "condition,layer,weight\n";
  char buf[64];
  for (const auto& s : table) {
    for (std::size_t l = 0; l < s.weights.size(); ++l) {
      std::snprintf(buf, sizeof buf, "%zu,%.9f", l, s.weights[l]);
      os << s.condition << "," << buf << "\n";
    }
  }
  return os.str();
}

/// Grouped bar chart: one group per layer, one bar per condition, so frozen
/// and fine-tuned runs overlay on the same axis.
inline std::string layer_weight_svg(const std::vector<LayerWeightSeries>& table) {
  static const char* colours[] = {"#4477aa", "#ee6677", "#228833", "#ccbb44", "#66ccee", "#aa3377", "#bbbbbb"};
  std::size_t layers = 0;
  double top = 0.0;
  for (const auto& s : table) {
    layers = std::max(layers, s.weights.size());
    for (double v : s.weights) top = std::max(top, v);
  }
  top = top > 0.0 ? top : 1.0;
  const double w = 640, h = 320, left = 50, bottom = 40, right = 10, header = 20 + 14.0 * static_cast<double>(table.size());
  const double plot_w = w - left - right, plot_h = h - bottom - header;
  const double group = layers ? plot_w / static_cast<double>(layers) : plot_w;
  const double bar = table.empty() ? 0.0 : 0.8 * group / static_cast<double>(table.size());
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << h - bottom << "\" x2=\"" << w - right << "\" y2=\"" << h - bottom
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << header << "\" x2=\"" << left << "\" y2=\"" << h - bottom
     << "\" stroke=\"black\"/>\n";
  os << "<text x=\"4\" y=\"" << header + 10 << "\" font-size=\"10\">" << top << "</text>\n";
  for (std::size_t c = 0; c < table.size(); ++c) {
    const char* col = colours[c % 7];
    os << "<rect x=\"" << left << "\" y=\"" << 6 + 14.0 * c << "\" width=\"10\" height=\"10\" fill=\"" << col << "\"/>"
       << "<text x=\"" << left + 14 << "\" y=\"" << 15 + 14.0 * c << "\" font-size=\"11\">" << table[c].condition
       << "</text>\n";
    for (std::size_t l = 0; l < table[c].weights.size(); ++l) {
      const double bh = plot_h * table[c].weights[l] / top;
      const double x = left + group * (static_cast<double>(l) + 0.1) + bar * static_cast<double>(c);
      os << "<rect x=\"" << x << "\" y=\"" << h - bottom - bh << "\" width=\"" << bar << "\" height=\"" << bh
         << "\" fill=\"" << col << "\"/>\n";
    }
  }
  for (std::size_t l = 0; l < layers; ++l) {
    os << "<text x=\"" << left + group * (static_cast<double>(l) + 0.5) << "\" y=\"" << h - bottom + 14
       << "\" font-size=\"10\" text-anchor=\"middle\">" << l << "</text>\n";
  }
  os << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << h - 8 << "\" font-size=\"11\" text-anchor=\"middle\">layer</text>\n";
  os << "</svg>\n";
  return os.str();
}

inline void write_layer_weight_report(const std::filesystem::path& csv_path, const std::vector<LayerWeightSeries>& table) {
  if (csv_path.has_parent_path()) std::filesystem::create_directories(csv_path.parent_path());
  std::ofstream(csv_path) << layer_weight_csv(table);
  auto svg = csv_path;
  svg.replace_extension(".svg");
  std::ofstream(svg) << layer_weight_svg(table);
}

}  // namespace melsvc::eval
