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
#include <memory>

#include "melsvc/core/matrix_file.hpp"
#include "melsvc/melody/trainer.hpp"

namespace melsvc::melody {

inline constexpr int kMelodySchemaVersion = 1;

inline nlohmann::json to_json(const nn::FFTBlockConfig& c) {
  return {{"num_blocks", c.num_blocks}, {"model_dim", c.model_dim}, {"attention_heads", c.attention_heads},
          {"conv_kernel", c.conv_kernel}, {"filter_dim", c.filter_dim}, {"dropout", c.dropout}};
}

inline nn::FFTBlockConfig fft_config_from_json(const nlohmann::json& j) {
  return {.num_blocks = j.at("num_blocks").get<int>(),
          .model_dim = j.at("model_dim").get<int>(),
          .attention_heads = j.at("attention_heads").get<int>(),
          .conv_kernel = j.at("conv_kernel").get<int>(),
          .filter_dim = j.at("filter_dim").get<int>(),
          .dropout = j.at("dropout").get<double>()};
}

/// The backbone config, architecture description and digest go into the
/// metadata so a load can rebuild the model and refuse a mismatched backbone.
inline void save_melody_checkpoint(const std::filesystem::path& path, MelodyModel& model,
                                   const ssl::BackboneConfig& backbone_cfg, const ssl::BackboneHandle& handle,
                                   const TrainHistory& history) {
  nn::Checkpoint ck;
  auto& m = ck.metadata;
  m["schema_version"] = kMelodySchemaVersion;
  m["kind"] = "melody";
  const auto& c = model.condition();
  m["condition"] = {{"name", c.name}, {"fine_tune", c.fine_tune}, {"weighted_sum", c.weighted_sum}, {"fft_blocks", c.fft_blocks}};
  m["seed"] = model.seed();
  m["fft"] = to_json(model.config().fft);
  m["weight_mode"] = ssl::to_string(model.config().weight_mode);
  m["lambdas"] = {model.config().lambda_pitch, model.config().lambda_energy, model.config().lambda_vuv};
  m["pitch_norm"] = {model.pitch_norm().mean, model.pitch_norm().std};
  m["energy_norm"] = {model.energy_norm().mean, model.energy_norm().std};
  m["backbone"] = {{"config", ssl::to_json(backbone_cfg)},
                   {"describe", model.backbone().describe()},
                   {"model_id", model.backbone().model_id()},
                   {"digest", model.backbone().digest()},
                   {"frozen_at", handle.frozen_at ? nlohmann::json(*handle.frozen_at) : nlohmann::json()}};
  auto& wh = m["weight_history"] = nlohmann::json::array();
  for (const auto& w : history.weights) wh.push_back({{"step", w.step}, {"weights", w.effective}});
  auto& lh = m["loss_history"] = nlohmann::json::array();
  for (const auto& l : history.losses) {
    lh.push_back({l.step, l.loss.total, l.loss.pitch, l.loss.energy, l.loss.vuv});
  }
  ck.store(model.all_params());
  nn::save_checkpoint(path, ck);
}

struct LoadedMelody {
  std::unique_ptr<MelodyModel> model;
  ssl::BackboneConfig backbone_config;
  nlohmann::json metadata;
};

inline LoadedMelody load_melody_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw data_error("missing-checkpoint", "melody checkpoint not found: " + path.string());
  const nn::Checkpoint ck = nn::load_checkpoint(path);
  const auto& m = ck.metadata;
  if (m.value("kind", "") != "melody" || m.value("schema_version", 0) != kMelodySchemaVersion) {
    throw data_error("compatibility", path.string() + " is not a melody checkpoint of schema " +
                                          std::to_string(kMelodySchemaVersion));
  }
  LoadedMelody out;
  out.metadata = m;
  out.backbone_config = ssl::backbone_config_from_json(m.at("backbone").at("config"));
  out.backbone_config.checkpoint = out.backbone_config.kind == "stub" ? "" : out.backbone_config.checkpoint;
  auto backbone = ssl::make_backbone(out.backbone_config);
  if (backbone->describe() != m.at("backbone").at("describe")) {
    throw data_error("compatibility", "backbone does not match the one recorded in " + path.string());
  }
  const auto& cj = m.at("condition");
  AblationCondition cond = parse_condition(cj.at("name").get<std::string>());
  MelodyConfig cfg;
  cfg.fft = fft_config_from_json(m.at("fft"));
  cfg.weight_mode = ssl::parse_weight_mode(m.at("weight_mode").get<std::string>());
  cfg.lambda_pitch = m.at("lambdas")[0];
  cfg.lambda_energy = m.at("lambdas")[1];
  cfg.lambda_vuv = m.at("lambdas")[2];
  out.model = std::make_unique<MelodyModel>(std::move(backbone), cond, cfg, m.at("seed").get<std::uint64_t>());
  ck.restore(out.model->all_params());
  out.model->pitch_norm() = {m.at("pitch_norm")[0], m.at("pitch_norm")[1]};
  out.model->energy_norm() = {m.at("energy_norm")[0], m.at("energy_norm")[1]};
  if (out.model->backbone().digest() != m.at("backbone").at("digest").get<std::string>()) {
    throw data_error("compatibility", "backbone digest mismatch in " + path.string());
  }
  return out;
}

inline std::vector<WeightLog> weight_history(const nlohmann::json& metadata) {
  if (!metadata.contains("weight_history") || metadata["weight_history"].empty()) {
    throw data_error("report", "checkpoint has no layer-weight history");
  }
  std::vector<WeightLog> out;
  for (const auto& w : metadata["weight_history"]) out.push_back({w.at("step"), w.at("weights").get<std::vector<double>>()});
  return out;
}

/// Feature export file: the T x 256 matrix with the source content hash.
inline void write_features(const std::filesystem::path& path, const MelodyFeatures& f, const AudioClip& source) {
  write_matrix_file(path, f.frames, source.content_hash());
}

}  // namespace melsvc::melody
