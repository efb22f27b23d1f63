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

#include <string>
#include <vector>

#include "melsvc/nn/ops.hpp"
#include "melsvc/ssl/layer_stack.hpp"

namespace melsvc::ssl {

enum class WeightMode { softmax, free };

inline WeightMode parse_weight_mode(const std::string& s) {
  if (s == "softmax") return WeightMode::softmax;
  if (s == "free") return WeightMode::free;
  throw config_error("weight-mode", "unknown layer weight mode '" + s + "'");
}
inline std::string to_string(WeightMode m) { return m == WeightMode::softmax ? "softmax" : "free"; }

inline Eigen::RowVectorXd softmax(const Eigen::RowVectorXd& logits) {
  const Eigen::RowVectorXd e = (logits.array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

/// Learnable per-layer weights over L + 1 hidden states.
struct LayerWeights {
  nn::Parameter logits;
  WeightMode mode = WeightMode::softmax;

  LayerWeights() = default;
  /// Softmax mode starts from equal logits; free mode from equal weights 1/(L+1).
  LayerWeights(int layers_plus_one, WeightMode m)
      : logits("ssl.layer_weights",
               m == WeightMode::softmax ? Mat::Zero(1, layers_plus_one)
                                        : Mat::Constant(1, layers_plus_one, 1.0 / layers_plus_one),
               false),
        mode(m) {}

  int size() const { return static_cast<int>(logits.value.cols()); }

  Eigen::RowVectorXd effective() const {
    const Eigen::RowVectorXd l = logits.value.row(0);
    return mode == WeightMode::softmax ? softmax(l) : l;
  }

  nn::Var effective(nn::Tape& t) {
    nn::Var l = t.param(logits);
    return mode == WeightMode::softmax ? nn::softmax_rows(l) : l;
  }
};

/// o_t = sum_l w[l] h_t^l.
inline Mat weighted_sum(const LayerStack& stack, const Eigen::RowVectorXd& w) {
  if (static_cast<std::size_t>(w.size()) != stack.hidden.size()) {
    throw data_error("shape", "layer weights have " + std::to_string(w.size()) + " entries for " +
                                  std::to_string(stack.hidden.size()) + " layers");
  }
  Mat out = Mat::Zero(stack.frames(), stack.dim());
  for (std::size_t l = 0; l < stack.hidden.size(); ++l) out += w(static_cast<Eigen::Index>(l)) * stack.hidden[l];
  return out;
}

inline Mat weighted_sum(const LayerStack& stack, const LayerWeights& w) { return weighted_sum(stack, w.effective()); }

inline nn::Var weighted_sum(const std::vector<nn::Var>& layers, nn::Var w) {
  if (static_cast<std::size_t>(w.cols()) != layers.size() || w.rows() != 1) {
    throw data_error("shape", "layer weights do not match the layer count");
  }
  nn::Var out = nn::scale_by_entry(layers[0], w, 0);
  for (std::size_t l = 1; l < layers.size(); ++l) {
    out = nn::add(out, nn::scale_by_entry(layers[l], w, static_cast<Eigen::Index>(l)));
  }
  return out;
}

}  // namespace melsvc::ssl
