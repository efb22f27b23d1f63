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

#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "melsvc/audio/clip.hpp"
#include "melsvc/nn/serialize.hpp"
#include "melsvc/ssl/layer_stack.hpp"

namespace melsvc::ssl {

/// Facade over a self-supervised speech model that exposes every layer.
class Backbone {
 public:
  virtual ~Backbone() = default;

  virtual std::string kind() const = 0;
  virtual std::string model_id() const = 0;
  /// Encoder layer count L; stacks carry L + 1 entries.
  virtual int num_layers() const = 0;
  virtual Eigen::Index dim() const = 0;
  virtual double hop_ms() const = 0;
  /// Shortest clip, in samples, that yields one frame.
  virtual std::size_t receptive_samples() const = 0;

  /// Layer outputs recorded on `tape`; gradients reach params() when the
  /// tape records gradients and the parameters are trainable.
  virtual std::vector<nn::Var> forward(nn::Tape& tape, const AudioClip& clip) = 0;
  virtual nn::ParamList params() = 0;

  /// Identity of the architecture, used for checkpoint compatibility.
  virtual nlohmann::json describe() const = 0;

  LayerStack extract(const AudioClip& clip) {
    nn::Tape tape(false, false);
    const auto layers = forward(tape, clip);
    LayerStack s;
    s.frame_hop_ms = hop_ms();
    s.hidden.reserve(layers.size());
    for (const auto& v : layers) s.hidden.push_back(v.value());
    return s;
  }

  std::string digest() { return nn::parameter_digest(params()); }

 protected:
  void check_clip(const AudioClip& clip) const {
    validate_clip(clip);
    if (clip.size() < receptive_samples()) {
      throw data_error("short-input", "clip '" + clip.source_id + "' has " + std::to_string(clip.size()) +
                                          " samples; backbone needs at least " + std::to_string(receptive_samples()));
    }
  }
};

using BackbonePtr = std::unique_ptr<Backbone>;

}  // namespace melsvc::ssl
