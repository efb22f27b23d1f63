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

#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include <json.hpp>

#include "melsvc/core/error.hpp"
#include "melsvc/data/manifest.hpp"
#include "melsvc/melody/checkpoint.hpp"
#include "melsvc/melody/condition.hpp"
#include "melsvc/melody/model.hpp"
#include "melsvc/melody/trainer.hpp"
#include "melsvc/ssl/factory.hpp"
#include "melsvc/svc/model.hpp"
#include "melsvc/svc/trainer.hpp"
#include "melsvc/vocoder/bridge.hpp"

namespace melsvc::app {

using Json = nlohmann::ordered_json;

inline constexpr const char* kConfigVersion = "melsvc-config/1";
inline constexpr const char* kResolvedConfigName = "config.resolved.yaml";

namespace detail {

inline Json fft_defaults(int blocks, int dim, int heads, int kernel, int filter, double dropout) {
  return {{"num_blocks", blocks}, {"model_dim", dim}, {"attention_heads", heads},
          {"conv_kernel", kernel}, {"filter_dim", filter}, {"dropout", dropout}};
}

}  // namespace detail

/// The full default configuration. It doubles as the schema: a loaded file may
/// only contain keys that appear here, with values of the same type.
inline Json default_config() {
  Json c;
  c["version"] = kConfigVersion;
  c["seed"] = 0;
  c["workers"] = 1;
  c["condition"] = "proposed";
  c["data"] = {{"corpus", ""},
               {"layout", "stems"},
               {"role", "extractor_corpus"},
               {"manifest", ""},
               {"labels", ""},
               {"held_out_singers", 0},
               {"split", {{"train", 0.8}, {"valid", 0.1}, {"test", 0.1}}},
               {"speed_rates", Json::array()}};
  c["dsp"] = {{"sample_rate", 16000}, {"frame_ms", 50.0}, {"hop_ms", 10.0}, {"n_mels", 80}};
  c["backbone"] = {{"kind", "stub"}, {"checkpoint", ""}, {"stub", Json(ssl::to_json(ssl::StubConfig{}))}};
  c["melody"] = {{"steps", 10000},
                 {"batch_size", 8},
                 {"crop_seconds", 3.0},
                 {"bgm_prob", 0.5},
                 {"snr_min", 0.0},
                 {"snr_max", 15.0},
                 {"lr", 2e-5},
                 {"weight_decay", 0.01},
                 {"cosine_decay", false},
                 {"freeze_step", 5000},
                 {"log_every", 100},
                 {"weight_mode", "softmax"},
                 {"lambda_pitch", 1.0},
                 {"lambda_energy", 0.5},
                 {"lambda_vuv", 0.5},
                 {"fft", detail::fft_defaults(4, 256, 2, 9, 1024, 0.1)}};
  c["svc"] = {{"steps", 10000},
              {"in_batch", 4},
              {"out_batch", 4},
              {"crop_frames", 300},
              {"generator_lr", 1e-4},
              {"discriminator_lr", 1e-4},
              {"melody_input", "features"},
              {"content", "stub"},
              {"content_root", ""},
              {"encoder", detail::fft_defaults(4, 256, 2, 9, 1024, 0.1)},
              {"decoder", detail::fft_defaults(4, 256, 2, 9, 1024, 0.1)},
              {"disc_channels", 64},
              {"disc_layers", 3},
              {"lambda_rf", 1.0},
              {"lambda_cv", 1.0},
              {"lambda_emb", 0.1},
              {"vocoder", "fallback"},
              {"vocoder_command", ""},
              {"vocoder_work_dir", ""}};
  c["eval"] = {{"testset", ""}, {"log_f0", true}, {"testset_seed", 0}};
  return c;
}

/// Keys holding filesystem paths. Only these may be overridden from the
/// environment, as MELSVC_<SECTION>_<KEY> (upper case).
inline const std::vector<std::pair<std::string, std::string>>& path_keys() {
  static const std::vector<std::pair<std::string, std::string>> keys = {
      {"data", "corpus"},        {"data", "manifest"},       {"data", "labels"},
      {"backbone", "checkpoint"}, {"svc", "content_root"},    {"svc", "vocoder_command"},
      {"svc", "vocoder_work_dir"}, {"eval", "testset"}};
  return keys;
}

inline std::string env_name(const std::string& section, const std::string& key) {
  std::string n = "MELSVC_" + section + "_" + key;
  for (char& ch : n) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return n;
}

namespace detail {

inline std::string join(const std::string& a, const std::string& b) { return a.empty() ? b : a + "." + b; }

/// Converts a YAML node into JSON guided by the schema node's type.
inline Json from_yaml(const YAML::Node& node, const Json& schema, const std::string& where) {
  auto bad = [&](const std::string& what) { return config_error("config", where + ": " + what); };
  if (schema.is_object()) {
    if (!node.IsMap()) throw bad("expected a mapping");
    Json out = schema;
    for (const auto& kv : node) {
      const std::string key = kv.first.as<std::string>();
      if (!schema.contains(key)) throw config_error("unknown-key", "unknown config key '" + join(where, key) + "'");
      out[key] = from_yaml(kv.second, schema[key], join(where, key));
    }
    return out;
  }
  if (schema.is_array()) {
    if (!node.IsSequence()) throw bad("expected a sequence");
    Json out = Json::array();
    for (const auto& v : node) {
      try {
        out.push_back(v.as<double>());
      } catch (const YAML::Exception&) {
        throw bad("expected numbers");
      }
    }
    return out;
  }
  if (!node.IsScalar()) throw bad("expected a scalar");
  try {
    if (schema.is_boolean()) return node.as<bool>();
    if (schema.is_number_integer()) return node.as<long long>();
    if (schema.is_number()) return node.as<double>();
    return node.as<std::string>();
  } catch (const YAML::Exception&) {
    throw bad("value '" + node.Scalar() + "' has the wrong type");
  }
}

inline void emit(YAML::Emitter& e, const Json& j) {
  if (j.is_object()) {
    e << YAML::BeginMap;
    for (const auto& [k, v] : j.items()) {
      e << YAML::Key << k << YAML::Value;
      emit(e, v);
    }
    e << YAML::EndMap;
  } else if (j.is_array()) {
    e << YAML::Flow << YAML::BeginSeq;
    for (const auto& v : j) emit(e, v);
    e << YAML::EndSeq;
  } else if (j.is_boolean()) {
    e << j.get<bool>();
  } else if (j.is_number_integer()) {
    e << j.get<long long>();
  } else if (j.is_number()) {
    e << YAML::Precision(17) << j.get<double>();
  } else {
    e << YAML::DoubleQuoted << j.get<std::string>();
  }
}

}  // namespace detail

/// Resolved experiment configuration: defaults, then the YAML file, then path
/// overrides from the environment.
class ExperimentConfig {
 public:
  ExperimentConfig() : j_(default_config()) {}

  static ExperimentConfig from_yaml_text(const std::string& text, bool apply_env = true) {
    ExperimentConfig c;
    YAML::Node node;
    try {
      node = YAML::Load(text);
    } catch (const YAML::Exception& e) {
      throw config_error("parse", std::string("config is not valid YAML: ") + e.what());
    }
    if (node.IsDefined() && !node.IsNull()) c.j_ = detail::from_yaml(node, c.j_, "");
    if (apply_env) c.apply_env();
    c.validate();
    return c;
  }

  static ExperimentConfig load(const std::filesystem::path& path, bool apply_env = true) {
    std::ifstream in(path);
    if (!in) throw config_error("missing-config", "cannot read config " + path.string());
    const std::string text{std::istreambuf_iterator<char>(in), {}};
    return from_yaml_text(text, apply_env);
  }

  void apply_env() {
    for (const auto& [section, key] : path_keys()) {
      if (const char* v = std::getenv(env_name(section, key).c_str())) j_[section][key] = std::string(v);
    }
  }

  void validate() const {
    if (j_["version"] != kConfigVersion) {
      throw config_error("version", "config version '" + j_["version"].get<std::string>() + "' is not " + kConfigVersion);
    }
    const auto& d = j_["dsp"];
    if (d["sample_rate"] != 16000 || d["frame_ms"] != 50.0 || d["hop_ms"] != 10.0 || d["n_mels"] != 80) {
      throw config_error("dsp", "only the 16 kHz, 50 ms / 10 ms, 80-band grid is supported");
    }
    melody::parse_condition(condition_name());
    parse_layout(j_["data"]["layout"]);
    parse_role(j_["data"]["role"]);
    ssl::parse_weight_mode(j_["melody"]["weight_mode"]);
    svc::parse_melody_input(j_["svc"]["melody_input"]);
    vocoder::parse_vocoder_kind(j_["svc"]["vocoder"]);
    const std::string content = j_["svc"]["content"];
    if (content != "stub" && content != "external") throw config_error("config", "svc.content must be stub|external");
    if (j_["workers"].get<int>() < 1) throw config_error("config", "workers must be >= 1");
  }

  Json& json() { return j_; }
  const Json& json() const { return j_; }

  std::uint64_t seed() const { return j_["seed"].get<std::uint64_t>(); }
  unsigned workers() const { return j_["workers"].get<unsigned>(); }
  std::string condition_name() const { return j_["condition"]; }
  std::string path(const std::string& section, const std::string& key) const { return j_[section][key]; }

  void set_seed(std::uint64_t s) { j_["seed"] = s; }
  void set_workers(unsigned w) { j_["workers"] = w; }
  void set_condition(const std::string& c) {
    j_["condition"] = melody::parse_condition(c).name;
  }
  void set_path(const std::string& section, const std::string& key, const std::string& value) {
    j_[section][key] = value;
  }

  DatasetSpec dataset_spec() const {
    const auto& d = j_["data"];
    DatasetSpec s;
    s.seed = seed();
    s.role = parse_role(d["role"]);
    s.held_out_singers = d["held_out_singers"];
    s.split_ratios.clear();
    for (const auto& [k, v] : d["split"].items())
      if (v.get<double>() > 0.0) s.split_ratios[parse_split(k)] = v.get<double>();
    return s;
  }
  CorpusLayout layout() const { return parse_layout(j_["data"]["layout"]); }
  std::vector<double> speed_rates() const { return j_["data"]["speed_rates"].get<std::vector<double>>(); }

  ssl::BackboneConfig backbone() const {
    const auto& b = j_["backbone"];
    ssl::BackboneConfig c;
    c.kind = b["kind"];
    c.checkpoint = b["checkpoint"];
    c.stub = ssl::stub_config_from_json(nlohmann::json::parse(b["stub"].dump()));
    return c;
  }

  static nn::FFTBlockConfig fft(const Json& f) {
    return melody::fft_config_from_json(nlohmann::json::parse(f.dump()));
  }

  melody::MelodyConfig melody_model() const {
    const auto& m = j_["melody"];
    melody::MelodyConfig c;
    c.fft = fft(m["fft"]);
    c.weight_mode = ssl::parse_weight_mode(m["weight_mode"]);
    c.lambda_pitch = m["lambda_pitch"];
    c.lambda_energy = m["lambda_energy"];
    c.lambda_vuv = m["lambda_vuv"];
    return c;
  }

  melody::TrainConfig melody_training() const {
    const auto& m = j_["melody"];
    melody::TrainConfig c;
    c.steps = m["steps"];
    c.batch_size = m["batch_size"];
    c.crop_seconds = m["crop_seconds"];
    c.bgm_prob = m["bgm_prob"];
    c.snr = {m["snr_min"].get<double>(), m["snr_max"].get<double>()};
    c.optimizer.lr = m["lr"];
    c.optimizer.weight_decay = m["weight_decay"];
    c.cosine_decay = m["cosine_decay"];
    c.freeze_step = m["freeze_step"];
    c.log_every = m["log_every"];
    c.seed = seed();
    return c;
  }

  svc::SvcConfig svc_model() const {
    const auto& s = j_["svc"];
    svc::SvcConfig c;
    c.encoder = fft(s["encoder"]);
    c.decoder = fft(s["decoder"]);
    c.melody_input = svc::parse_melody_input(s["melody_input"]);
    c.disc_channels = s["disc_channels"];
    c.disc_layers = s["disc_layers"];
    c.lambda_rf = s["lambda_rf"];
    c.lambda_cv = s["lambda_cv"];
    c.lambda_emb = s["lambda_emb"];
    return c;
  }

  svc::SvcTrainConfig svc_training() const {
    const auto& s = j_["svc"];
    svc::SvcTrainConfig c;
    c.steps = s["steps"];
    c.in_batch = s["in_batch"];
    c.out_batch = s["out_batch"];
    c.crop_frames = s["crop_frames"];
    c.generator_opt.lr = s["generator_lr"];
    c.discriminator_opt.lr = s["discriminator_lr"];
    c.seed = seed();
    return c;
  }

  vocoder::VocoderHandle vocoder() const {
    const auto& s = j_["svc"];
    vocoder::VocoderHandle h;
    h.kind = vocoder::parse_vocoder_kind(s["vocoder"]);
    if (h.kind == vocoder::VocoderKind::external_neural) {
      h.config = {{"command", s["vocoder_command"].get<std::string>()}};
      if (!s["vocoder_work_dir"].get<std::string>().empty()) h.config["work_dir"] = s["vocoder_work_dir"].get<std::string>();
    }
    return h;
  }

  std::string to_yaml() const {
    YAML::Emitter e;
    detail::emit(e, j_);
    return std::string(e.c_str()) + "\n";
  }

  /// Writes the resolved config into an output directory.
  void archive(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    std::ofstream(dir / kResolvedConfigName) << to_yaml();
  }

 private:
  Json j_;
};

}  // namespace melsvc::app
