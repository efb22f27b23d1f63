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
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "melsvc/app/config.hpp"
#include "melsvc/core/hash.hpp"
#include "melsvc/data/loader.hpp"
#include "melsvc/eval/report.hpp"
#include "melsvc/melody/checkpoint.hpp"
#include "melsvc/pitch/labeling.hpp"
#include "melsvc/svc/convert.hpp"
#include "melsvc/synth/toy.hpp"
#include "melsvc/vocoder/bridge.hpp"
#include "melsvc/vocoder/gta.hpp"

namespace melsvc::app {

namespace fs = std::filesystem;

inline std::string file_hash(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw data_error("io", "cannot read " + p.string());
  const std::string bytes{std::istreambuf_iterator<char>(in), {}};
  Fnv1a h;
  h.update(bytes);
  return h.hex();
}

inline void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw data_error("io", "cannot write " + p.string());
  out << text;
}

inline void write_json(const fs::path& p, const nlohmann::json& j) { write_text(p, j.dump(2) + "\n"); }

inline fs::path output_dir_of(const fs::path& file) {
  return file.has_parent_path() ? file.parent_path() : fs::path(".");
}

// ---- data ----

/// Toy corpora: `<root>/stems/<song>/{vocals,accompaniment}.wav` for the
/// extractor, `<root>/target/target/<take>.wav` for the in-set singer and
/// `<root>/others/<singer>/<take>.wav` for the out-set singers. Each clean
/// root is scanned as one manifest.
inline void make_toy_corpus(const fs::path& root, std::size_t songs, std::size_t takes, double seconds,
                            std::uint64_t seed) {
  synth::write_stems_corpus(root / "stems", songs, seconds, derive_seed(seed, 1));
  synth::write_clean_corpus(root / "target", {"target"}, takes, seconds, derive_seed(seed, 2));
  synth::write_clean_corpus(root / "others", {"other_a", "other_b"}, takes, seconds, derive_seed(seed, 3));
}

inline std::vector<ManifestEntry> prepare_data(const ExperimentConfig& cfg, const fs::path& out_manifest) {
  const std::string corpus = cfg.path("data", "corpus");
  if (corpus.empty()) throw config_error("config", "data.corpus is not set");
  auto entries = build_manifest(corpus, cfg.layout(), cfg.dataset_spec());
  if (!cfg.speed_rates().empty()) entries = add_speed_copies(entries, cfg.speed_rates());
  write_manifest(out_manifest, entries);
  cfg.archive(output_dir_of(out_manifest));
  return entries;
}

inline std::vector<ManifestEntry> concat_manifests(const std::vector<std::string>& paths) {
  std::vector<ManifestEntry> all;
  for (const auto& p : paths) {
    auto e = read_manifest(p);
    all.insert(all.end(), e.begin(), e.end());
  }
  return all;
}

inline std::vector<ManifestEntry> select(const std::vector<ManifestEntry>& entries, std::optional<Split> split,
                                         std::optional<Role> role) {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries)
    if ((!split || e.split == *split) && (!role || e.role == *role)) out.push_back(e);
  return out;
}

inline pitch::LabelSet label_stage(const ExperimentConfig& cfg, const std::vector<ManifestEntry>& entries,
                                   const fs::path& out_dir) {
  const pitch::LabelCache cache(out_dir);
  auto set = pitch::label_corpus(entries, pitch::default_extractors(), &cache, cfg.workers());
  nlohmann::json index = {{"labelled", set.labels.size()}, {"failures", nlohmann::json::array()}};
  for (const auto& f : set.failures) index["failures"].push_back({{"key", f.key}, {"reason", f.reason}});
  write_json(out_dir / "label_report.json", index);
  cfg.archive(out_dir);
  return set;
}

struct MelodyData {
  std::vector<melody::TrainItem> items;
  std::vector<AudioClip> bgm;
};

/// Training-split clips with their pitch labels (computed into the label cache
/// when missing) and the training-split BGM pool.
inline MelodyData melody_data(const ExperimentConfig& cfg, const std::vector<ManifestEntry>& entries) {
  const auto train = select(entries, Split::train, std::nullopt);
  if (train.empty()) throw data_error("empty-corpus", "manifest has no training-split entries");
  const std::string label_dir = cfg.path("data", "labels");
  std::optional<pitch::LabelCache> cache;
  if (!label_dir.empty()) cache.emplace(label_dir);
  const auto labels = pitch::label_corpus(train, pitch::default_extractors(), cache ? &*cache : nullptr, cfg.workers());
  MelodyData d;
  for (const auto& e : train) {
    const auto it = labels.labels.find(pitch::label_key(e));
    if (it == labels.labels.end()) continue;
    AudioClip clip = load_vocal(e);
    clip.source_id = pitch::label_key(e);
    d.items.push_back({std::move(clip), it->second});
    if (!e.augmented) {
      if (auto b = load_bgm(e)) d.bgm.push_back(std::move(*b));
    }
  }
  if (d.items.empty()) throw data_error("empty-corpus", "no labelled training clips");
  return d;
}

// ---- melody extractor ----

struct MelodyRun {
  std::unique_ptr<melody::MelodyModel> model;
  melody::TrainHistory history;
  fs::path checkpoint;
};

/// Layer-weight log: step,w_0..w_L.
inline std::string weight_log_csv(const melody::TrainHistory& h) {
  std::ostringstream os;
  const std::size_t n = h.weights.empty() ? 0 : h.weights.front().effective.size();
  os << "step";
  for (std::size_t l = 0; l < n; ++l) os << ",w_" << l;
  os << "\n";
  char buf[32];
  for (const auto& w : h.weights) {
    os << w.step;
    for (double v : w.effective) {
      std::snprintf(buf, sizeof buf, ",%.9f", v);
      os << buf;
    }
    os << "\n";
  }
  return os.str();
}

inline MelodyRun train_melody_stage(const ExperimentConfig& cfg, const MelodyData& data, const fs::path& out_dir,
                                    const std::optional<std::string>& condition = std::nullopt) {
  const auto cond = melody::parse_condition(condition.value_or(cfg.condition_name()));
  const auto bcfg = cfg.backbone();
  MelodyRun run;
  run.model = std::make_unique<melody::MelodyModel>(ssl::make_backbone(bcfg), cond, cfg.melody_model(), cfg.seed());
  auto handle = ssl::make_handle(run.model->backbone().model_id(), cond.fine_tune);
  run.history = melody::train_melody(*run.model, data.items, data.bgm, cfg.melody_training(), handle);
  fs::create_directories(out_dir);
  run.checkpoint = out_dir / "melody.ckpt";
  melody::save_melody_checkpoint(run.checkpoint, *run.model, bcfg, handle, run.history);
  write_text(out_dir / "layer_weights.csv", weight_log_csv(run.history));
  cfg.archive(out_dir);
  return run;
}

inline melody::LoadedMelody load_melody_stage(const fs::path& path) {
  try {
    return melody::load_melody_checkpoint(path);
  } catch (const Error& e) {
    throw StageFailure("melody-extractor", e.what());
  }
}

// ---- conversion ----

struct SvcSystem {
  std::optional<melody::LoadedMelody> melody;
  std::unique_ptr<svc::Generator> generator;
  std::unique_ptr<svc::ContentProvider> content;
  std::string melody_sig;
};

/// Loads the conversion system. A feature-input SVC model needs its melody
/// extractor; a given but unloadable melody checkpoint is always an error.
inline SvcSystem load_svc_system(const ExperimentConfig& cfg, const fs::path& svc_ckpt,
                                 const std::optional<fs::path>& melody_ckpt) {
  SvcSystem s;
  if (melody_ckpt) s.melody = load_melody_stage(*melody_ckpt);
  try {
    auto loaded = svc::load_svc_checkpoint(svc_ckpt);
    s.generator = std::move(loaded.generator);
    s.melody_sig = loaded.metadata.value("melody_signature", "");
    s.content = svc::make_content_provider(loaded.metadata.value("content", "stub"), cfg.path("svc", "content_root"));
  } catch (const Error& e) {
    throw StageFailure("svc-core", e.what());
  }
  if (s.generator->config().melody_input == svc::MelodyInput::features && !s.melody) {
    throw StageFailure("melody-extractor", "the SVC model takes melody features but no melody checkpoint was given");
  }
  return s;
}

inline dsp::MelSpectrogram convert_stage(SvcSystem& s, const AudioClip& source) {
  try {
    return svc::convert(source, s.melody ? s.melody->model.get() : nullptr, *s.content, *s.generator, s.melody_sig);
  } catch (const Error& e) {
    throw StageFailure("svc-core", e.what());
  }
}

inline AudioClip synthesize_stage(const dsp::MelSpectrogram& mel, const vocoder::VocoderHandle& v) {
  try {
    return vocoder::synthesize(mel, v);
  } catch (const Error& e) {
    throw StageFailure("vocoder-bridge", e.what());
  }
}

inline std::vector<svc::SvcItem> svc_items(SvcSystem& s, const std::vector<ManifestEntry>& entries,
                                           svc::MelodyInput mode) {
  std::vector<svc::SvcItem> items;
  for (const auto& e : entries) {
    AudioClip clip = load_vocal(e);
    clip.source_id = pitch::label_key(e);
    items.push_back(svc::make_item(clip, s.melody ? s.melody->model.get() : nullptr, *s.content, mode));
  }
  return items;
}

struct SvcRun {
  std::unique_ptr<svc::Generator> generator;
  std::vector<svc::SvcLossComponents> history;
  fs::path checkpoint;
};

/// Trains the converter on training-split in-set clips against out-set clips.
inline SvcRun train_svc_stage(const ExperimentConfig& cfg, const std::vector<ManifestEntry>& entries,
                              const std::optional<fs::path>& melody_ckpt, const fs::path& out_dir) {
  auto model_cfg = cfg.svc_model();
  SvcSystem sys;
  if (melody_ckpt) sys.melody = load_melody_stage(*melody_ckpt);
  if (model_cfg.melody_input == svc::MelodyInput::features) {
    if (!sys.melody) throw StageFailure("melody-extractor", "svc.melody_input=features needs --melody-ckpt");
    model_cfg.melody_dim = sys.melody->model->config().fft.model_dim;
    sys.melody_sig = svc::melody_signature(*sys.melody->model);
  }
  sys.content = svc::make_content_provider(cfg.json()["svc"]["content"], cfg.path("svc", "content_root"));
  const auto in = svc_items(sys, select(entries, Split::train, Role::in_set), model_cfg.melody_input);
  const auto out = svc_items(sys, select(entries, Split::train, Role::out_set), model_cfg.melody_input);
  if (in.empty()) throw data_error("empty-corpus", "no training-split in-set clips for SVC training");
  SvcRun run;
  run.generator = std::make_unique<svc::Generator>(model_cfg, cfg.seed());
  svc::Discriminators d(model_cfg, derive_seed(cfg.seed(), 0xd15c));
  try {
    run.history = svc::train_svc(*run.generator, d, in, out, cfg.svc_training());
  } catch (const Error& e) {
    throw StageFailure("svc-core", e.what());
  }
  fs::create_directories(out_dir);
  run.checkpoint = out_dir / "svc.ckpt";
  svc::save_svc_checkpoint(run.checkpoint, *run.generator, cfg.seed(), sys.melody_sig, sys.content->kind(), run.history);
  cfg.archive(out_dir);
  return run;
}

// ---- evaluation ----

inline nlohmann::json provenance(const ExperimentConfig& cfg) {
  return {{"tool", std::string("melsvc ") + kConfigVersion}, {"report", eval::kReportVersion},
          {"seed", cfg.seed()}, {"testset_seed", cfg.json()["eval"]["testset_seed"].get<std::uint64_t>()}};
}

inline eval::NoisyTestSet testset_stage(const ExperimentConfig& cfg, const std::vector<ManifestEntry>& entries) {
  return eval::build_noisy_testset(entries, cfg.json()["eval"]["testset_seed"].get<std::uint64_t>());
}

struct AblationRow {
  melody::AblationCondition condition;
  bool ok = false;
  std::string error;
  std::optional<double> f0rmse, f0corr;
};

inline std::string format_metric(const std::optional<double>& v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *v);
  return buf;
}

/// One row per condition: FT / WS / FFT flags, F0RMSE, F0CORR, status.
inline std::string ablation_table(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << "| condition | FT | WS | FFT | F0RMSE | F0CORR | status |\n";
  os << "|---|---|---|---|---|---|---|\n";
  auto mark = [](bool b) { return b ? "yes" : "no"; };
  for (const auto& r : rows) {
    os << "| " << r.condition.name << " | " << mark(r.condition.fine_tune) << " | " << mark(r.condition.weighted_sum)
       << " | " << mark(r.condition.fft_blocks) << " | " << format_metric(r.f0rmse) << " | " << format_metric(r.f0corr)
       << " | " << (r.ok ? "ok" : "failed") << " |\n";
  }
  return os.str();
}

/// Trains every condition on the same data and scores the predicted f0 of
/// each noisy mixture against the clean-reference f0. A failing condition is
/// recorded and the matrix continues.
inline std::vector<AblationRow> run_ablation_matrix(const ExperimentConfig& cfg,
                                                    const std::vector<ManifestEntry>& entries, const fs::path& out_dir,
                                                    const std::vector<melody::AblationCondition>& conditions =
                                                        {melody::all_conditions().begin(),
                                                         melody::all_conditions().end()}) {
  const MelodyData data = melody_data(cfg, entries);
  const eval::NoisyTestSet testset = testset_stage(cfg, entries);
  const auto labeler = pitch::default_labeler();
  const bool log_f0 = cfg.json()["eval"]["log_f0"];
  std::vector<AblationRow> rows;
  for (const auto& cond : conditions) {
    AblationRow row{cond, false, {}, {}, {}};
    try {
      auto run = train_melody_stage(cfg, data, out_dir / cond.name, cond.name);
      const auto rep = eval::evaluate_tracks(
          [&](const eval::NoisyItem& it) { return run.model->predict_track(it.mixture); }, testset, labeler, 1, log_f0);
      write_json(out_dir / cond.name / "report.json", eval::to_json(rep, provenance(cfg)));
      row.ok = true;
      if (rep.overall.n_rmse) row.f0rmse = rep.overall.f0rmse;
      if (rep.overall.n_corr) row.f0corr = rep.overall.f0corr;
    } catch (const std::exception& e) {
      log::warn("ablation condition " + cond.name + " failed: " + e.what());
      row.error = e.what();
    }
    rows.push_back(row);
  }
  write_text(out_dir / "ablation.md", ablation_table(rows));
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : rows) {
    j.push_back({{"condition", r.condition.name},
                 {"fine_tune", r.condition.fine_tune},
                 {"weighted_sum", r.condition.weighted_sum},
                 {"fft_blocks", r.condition.fft_blocks},
                 {"status", r.ok ? "ok" : "failed"},
                 {"error", r.error},
                 {"f0rmse", r.f0rmse ? nlohmann::json(*r.f0rmse) : nlohmann::json()},
                 {"f0corr", r.f0corr ? nlohmann::json(*r.f0corr) : nlohmann::json()}});
  }
  write_json(out_dir / "ablation.json", j);
  cfg.archive(out_dir);
  return rows;
}

struct EndToEndResult {
  fs::path output;
  std::string output_hash;
  std::optional<double> f0rmse, f0corr;
};

/// convert -> synthesize -> optional evaluation against a clean reference.
/// Writes the waveform plus a `<output>.json` sidecar.
inline EndToEndResult end_to_end(const ExperimentConfig& cfg, const fs::path& source_wav, const fs::path& svc_ckpt,
                                 const std::optional<fs::path>& melody_ckpt, const fs::path& output,
                                 const std::optional<fs::path>& reference = std::nullopt) {
  AudioClip source;
  try {
    source = ingest(source_wav);
  } catch (const Error& e) {
    throw StageFailure("data-manifest", e.what());
  }
  SvcSystem sys = load_svc_system(cfg, svc_ckpt, melody_ckpt);
  const auto mel = convert_stage(sys, source);
  const AudioClip audio = synthesize_stage(mel, cfg.vocoder());
  write_clip(output, audio);
  EndToEndResult r;
  r.output = output;
  r.output_hash = file_hash(output);
  nlohmann::json side = {{"source", source_wav.string()},
                         {"source_hash", source.content_hash()},
                         {"output_hash", r.output_hash},
                         {"frames", mel.frames.rows()},
                         {"samples", audio.size()},
                         {"vocoder", vocoder::to_string(cfg.vocoder().kind)}};
  if (reference) {
    try {
      const auto labeler = pitch::default_labeler();
      const FrameTrack ref = labeler(ingest(*reference));
      const FrameTrack conv = labeler(ingest(output));
      r.f0rmse = eval::f0rmse(ref, conv);
      r.f0corr = eval::f0corr(ref, conv, cfg.json()["eval"]["log_f0"]);
    } catch (const Error& e) {
      throw StageFailure("eval-metrics", e.what());
    }
    side["f0rmse"] = r.f0rmse ? nlohmann::json(*r.f0rmse) : nlohmann::json();
    side["f0corr"] = r.f0corr ? nlohmann::json(*r.f0corr) : nlohmann::json();
  }
  auto sidecar = output;
  sidecar += ".json";
  write_json(sidecar, side);
  cfg.archive(output_dir_of(output));
  return r;
}

inline int exit_code(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::config: return 2;
    case ErrorKind::data: return 3;
    case ErrorKind::stage: return 4;
  }
  return 4;
}

}  // namespace melsvc::app
