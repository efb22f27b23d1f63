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

#include <cmath>
#include <vector>

#include "melsvc/nn/tape.hpp"

namespace melsvc::ssl {

using nn::Mat;

/// Hidden states of a backbone for one clip. hidden[0] is the front-end
/// output and hidden[1..L] the encoder layers, each T_ssl x D.
struct LayerStack {
  std::vector<Mat> hidden;
  double frame_hop_ms = 20.0;

  int num_layers() const { return static_cast<int>(hidden.size()) - 1; }
  Eigen::Index frames() const { return hidden.empty() ? 0 : hidden[0].rows(); }
  Eigen::Index dim() const { return hidden.empty() ? 0 : hidden[0].cols(); }
};

inline void validate_stack(const LayerStack& s) {
  if (s.hidden.size() < 2) throw data_error("layer-stack", "a layer stack needs the front-end and at least one layer");
  for (const Mat& h : s.hidden) {
    if (h.rows() != s.frames() || h.cols() != s.dim()) throw data_error("shape", "ragged layer stack");
    if (!h.allFinite()) throw data_error("non-finite", "layer stack has non-finite entries");
  }
}

}  // namespace melsvc::ssl
