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

#include "melsvc/core/matrix_file.hpp"
#include "melsvc/ssl/backbone.hpp"

namespace melsvc::ssl {

/// Pretrained backbone whose hidden states were computed offline.
///
/// Directory contract:
///   backbone.json            {"model_id", "num_layers", "dim", "hop_ms", "receptive_samples"}
///   <hash>.l<k>.mat          layer k (0..L) for the clip with content hash <hash>
/// Precomputed states cannot be fine-tuned, so params() is empty.
class ExternalLayerBackbone final : public Backbone {
 public:
  ExternalLayerBackbone(std::string kind, std::filesystem::path root) : kind_(std::move(kind)), root_(std::move(root)) {
    const auto meta_path = root_ / "backbone.json";
    std::ifstream in(meta_path);
    if (!in) throw config_error("backbone", "external backbone lacks " + meta_path.string());
    const auto meta = nlohmann::json::parse(in);
    model_id_ = meta.at("model_id").get<std::string>();
    num_layers_ = meta.at("num_layers").get<int>();
    dim_ = meta.at("dim").get<Eigen::Index>();
    hop_ms_ = meta.value("hop_ms", 20.0);
    receptive_ = meta.value("receptive_samples", std::size_t{400});
    if (num_layers_ < 1 || dim_ < 1) throw config_error("backbone", "malformed " + meta_path.string());
  }

  std::string kind() const override { return kind_; }
  std::string model_id() const override { return model_id_; }
  int num_layers() const override { return num_layers_; }
  Eigen::Index dim() const override { return dim_; }
  double hop_ms() const override { return hop_ms_; }
  std::size_t receptive_samples() const override { return receptive_; }

  std::vector<nn::Var> forward(nn::Tape& tape, const AudioClip& clip) override {
    check_clip(clip);
    const std::string hash = clip.content_hash();
    std::vector<nn::Var> out;
    for (int k = 0; k <= num_layers_; ++k) {
      const auto path = root_ / (hash + ".l" + std::to_string(k) + ".mat");
      if (!std::filesystem::exists(path)) {
        throw data_error("missing-features", "no precomputed layer " + std::to_string(k) + " for clip '" +
                                                 clip.source_id + "' (" + hash + ")");
      }
      MatrixFile f = read_matrix_file(path);
      if (f.values.cols() != dim_) throw data_error("shape", "layer file " + path.string() + " has wrong width");
      if (!out.empty() && f.values.rows() != out[0].rows()) throw data_error("shape", "ragged layers for " + hash);
      out.push_back(tape.constant(std::move(f.values)));
    }
    return out;
  }

  nn::ParamList params() override { return {}; }

  nlohmann::json describe() const override {
    return {{"kind", kind_}, {"model_id", model_id_}, {"num_layers", num_layers_}, {"dim", dim_}};
  }

  /// Writes a stack in the directory contract (used to import features).
  static void write_stack(const std::filesystem::path& root, const AudioClip& clip, const LayerStack& s) {
    const std::string hash = clip.content_hash();
    for (std::size_t k = 0; k < s.hidden.size(); ++k) {
      write_matrix_file(root / (hash + ".l" + std::to_string(k) + ".mat"), s.hidden[k], hash);
    }
  }

 private:
  std::string kind_;
  std::filesystem::path root_;
  std::string model_id_;
  int num_layers_ = 0;
  Eigen::Index dim_ = 0;
  double hop_ms_ = 20.0;
  std::size_t receptive_ = 400;
};

}  // namespace melsvc::ssl
