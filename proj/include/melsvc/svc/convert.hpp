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

#include "melsvc/melody/checkpoint.hpp"
#include "melsvc/pitch/labeling.hpp"
#include "melsvc/svc/trainer.hpp"

namespace melsvc::svc {

inline constexpr int kSvcSchemaVersion = 1;

/// Identity of a melody extractor that an SVC model was trained against.
inline std::string melody_signature(melody::MelodyModel& m) {
  Fnv1a h;
  h.update(m.condition().name);
  h.update(nn::parameter_digest(m.all_params()));
  return h.hex();
}

/// Baseline melody input: (log2(f0/440) or 0, voicing, log RMS) per frame
/// from the signal-processing pitch oracle.
inline Mat raw_melody_frames(const AudioClip& clip) {
  static const auto labeler = pitch::default_labeler();
  const FrameTrack f0 = labeler(clip);
  const auto energy = dsp::rms_energy(clip);
  const auto n = static_cast<Eigen::Index>(std::min(f0.size(), energy.values.size()));
  Mat out(n, 3);
  for (Eigen::Index t = 0; t < n; ++t) {
    const auto k = static_cast<std::size_t>(t);
    out(t, 0) = f0.vuv[k] ? melody::log2_pitch(f0.f0_hz[k]) : 0.0;
    out(t, 1) = f0.vuv[k] ? 1.0 : 0.0;
    out(t, 2) = melody::log_energy(energy.values[k]);
  }
  return out;
}

/// Melody-encoder input for a clip under the configured mode.
inline Mat melody_input(const AudioClip& clip, melody::MelodyModel* extractor, MelodyInput mode) {
  if (mode == MelodyInput::raw_pitch_energy) return raw_melody_frames(clip);
  if (!extractor) throw config_error("melody-input", "feature input mode needs a melody extractor");
  return extractor->export_features(clip).frames;
}

inline SvcItem make_item(const AudioClip& clip, melody::MelodyModel* extractor, ContentProvider& content,
                         MelodyInput mode) {
  return {melody_input(clip, extractor, mode), content.content(clip), dsp::mel_spectrogram(clip).frames,
          clip.source_id};
}

inline nlohmann::json to_json(const SvcConfig& c) {
  return {{"encoder", melody::to_json(c.encoder)}, {"decoder", melody::to_json(c.decoder)},
          {"melody_input", to_string(c.melody_input)}, {"melody_dim", c.melody_dim}, {"n_mels", c.n_mels},
          {"disc_channels", c.disc_channels}, {"disc_layers", c.disc_layers},
          {"lambda_rf", c.lambda_rf}, {"lambda_cv", c.lambda_cv}, {"lambda_emb", c.lambda_emb}};
}

inline SvcConfig svc_config_from_json(const nlohmann::json& j) {
  SvcConfig c;
  c.encoder = melody::fft_config_from_json(j.at("encoder"));
  c.decoder = melody::fft_config_from_json(j.at("decoder"));
  c.melody_input = parse_melody_input(j.at("melody_input").get<std::string>());
  c.melody_dim = j.at("melody_dim").get<int>();
  c.n_mels = j.at("n_mels").get<int>();
  c.disc_channels = j.at("disc_channels").get<int>();
  c.disc_layers = j.at("disc_layers").get<int>();
  c.lambda_rf = j.at("lambda_rf").get<double>();
  c.lambda_cv = j.at("lambda_cv").get<double>();
  c.lambda_emb = j.at("lambda_emb").get<double>();
  return c;
}

inline void save_svc_checkpoint(const std::filesystem::path& path, Generator& g, std::uint64_t seed,
                                const std::string& melody_sig, const std::string& content_kind,
                                const std::vector<SvcLossComponents>& history = {}) {
  nn::Checkpoint ck;
  ck.metadata["schema_version"] = kSvcSchemaVersion;
  ck.metadata["kind"] = "svc";
  ck.metadata["seed"] = seed;
  ck.metadata["config"] = to_json(g.config());
  ck.metadata["melody_signature"] = melody_sig;
  ck.metadata["content"] = content_kind;
  auto& h = ck.metadata["loss_history"] = nlohmann::json::array();
  for (const auto& c : history) h.push_back({c.recon, c.adv_rf, c.adv_cv, c.adv_emb, c.d_rf, c.d_cv, c.d_emb});
  ck.store(g.params());
  nn::save_checkpoint(path, ck);
}

struct LoadedSvc {
  std::unique_ptr<Generator> generator;
  nlohmann::json metadata;
};

inline LoadedSvc load_svc_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw data_error("missing-checkpoint", "SVC checkpoint not found: " + path.string());
  const nn::Checkpoint ck = nn::load_checkpoint(path);
  if (ck.metadata.value("kind", "") != "svc" || ck.metadata.value("schema_version", 0) != kSvcSchemaVersion) {
    throw data_error("compatibility", path.string() + " is not an SVC checkpoint of schema " +
                                          std::to_string(kSvcSchemaVersion));
  }
  LoadedSvc out;
  out.metadata = ck.metadata;
  out.generator = std::make_unique<Generator>(svc_config_from_json(ck.metadata.at("config")),
                                              ck.metadata.at("seed").get<std::uint64_t>());
  ck.restore(out.generator->params());
  return out;
}

/// Deterministic inference: melody input + content -> encode -> decode.
inline dsp::MelSpectrogram convert(const AudioClip& source, melody::MelodyModel* extractor, ContentProvider& content,
                                   Generator& g, const std::string& expected_melody_sig = {}) {
  if (g.config().melody_input == MelodyInput::features && extractor && !expected_melody_sig.empty() &&
      melody_signature(*extractor) != expected_melody_sig) {
    throw data_error("compatibility", "melody extractor differs from the one the SVC model was trained with");
  }
  const Mat m = melody_input(source, extractor, g.config().melody_input);
  const Mat c = content.content(source);
  nn::Tape t(false, false);
  dsp::MelSpectrogram out;
  out.frames = g.decode(t, g.encode(t, m, c)).value();
  return out;
}

}  // namespace melsvc::svc
