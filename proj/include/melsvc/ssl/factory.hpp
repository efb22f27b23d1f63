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
#include <string>

#include "melsvc/ssl/external.hpp"
#include "melsvc/ssl/stub.hpp"

namespace melsvc::ssl {

/// `backbone: {kind: stub|hubert|wavlm, checkpoint: path}`. For the stub the
/// checkpoint is optional and holds trained weights; for hubert/wavlm it is a
/// directory of precomputed hidden states.
struct BackboneConfig {
  std::string kind = "stub";
  std::string checkpoint;
  StubConfig stub;
};

inline nlohmann::json to_json(const StubConfig& c) {
  return {{"num_layers", c.num_layers}, {"dim", c.dim},         {"heads", c.heads},
          {"filter_dim", c.filter_dim}, {"filters", c.filters}, {"f_lo", c.f_lo},
          {"f_hi", c.f_hi},             {"window", c.window},   {"hop", c.hop},
          {"seed", c.seed},             {"identity_layers", c.identity_layers}};
}

inline StubConfig stub_config_from_json(const nlohmann::json& j) {
  StubConfig c;
  c.num_layers = j.at("num_layers").get<int>();
  c.dim = j.at("dim").get<int>();
  c.heads = j.at("heads").get<int>();
  c.filter_dim = j.at("filter_dim").get<int>();
  c.filters = j.at("filters").get<int>();
  c.f_lo = j.at("f_lo").get<double>();
  c.f_hi = j.at("f_hi").get<double>();
  c.window = j.at("window").get<std::size_t>();
  c.hop = j.at("hop").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.identity_layers = j.at("identity_layers").get<bool>();
  return c;
}

inline nlohmann::json to_json(const BackboneConfig& c) {
  return {{"kind", c.kind}, {"checkpoint", c.checkpoint}, {"stub", to_json(c.stub)}};
}

inline BackboneConfig backbone_config_from_json(const nlohmann::json& j) {
  BackboneConfig c;
  c.kind = j.at("kind").get<std::string>();
  c.checkpoint = j.value("checkpoint", std::string{});
  if (j.contains("stub")) c.stub = stub_config_from_json(j.at("stub"));
  return c;
}

inline BackbonePtr make_backbone(const BackboneConfig& c) {
  if (c.kind == "stub") {
    auto b = std::make_unique<StubBackbone>(c.stub);
    if (!c.checkpoint.empty()) nn::load_checkpoint(c.checkpoint).restore(b->params());
    return b;
  }
  if (c.kind == "hubert" || c.kind == "wavlm") {
    if (c.checkpoint.empty()) throw config_error("backbone", c.kind + " backbone needs a checkpoint directory");
    return std::make_unique<ExternalLayerBackbone>(c.kind, c.checkpoint);
  }
  throw config_error("backbone", "unknown backbone kind '" + c.kind + "'");
}

}  // namespace melsvc::ssl
