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

#include "melsvc/nn/layers.hpp"

namespace melsvc::nn {

struct AdamWConfig {
  double lr = 2e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  double clip_norm = 1.0;  // <= 0 disables clipping
};

/// AdamW with decoupled weight decay. Only trainable parameters that
/// received a gradient are updated; gradients are consumed (zeroed).
class AdamW {
 public:
  explicit AdamW(AdamWConfig c = {}) : config_(c) {}

  const AdamWConfig& config() const { return config_; }
  void set_lr(double lr) { config_.lr = lr; }
  long steps() const { return step_; }

  /// Global L2 norm of the gradients of trainable parameters.
  static double grad_norm(const ParamList& params) {
    double s = 0.0;
    for (const Parameter* p : params) {
      if (p->trainable && p->grad.size() != 0) s += p->grad.squaredNorm();
    }
    return std::sqrt(s);
  }

  void step(const ParamList& params) {
    ++step_;
    double factor = 1.0;
    if (config_.clip_norm > 0.0) {
      const double norm = grad_norm(params);
      if (norm > config_.clip_norm) factor = config_.clip_norm / norm;
    }
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
    for (Parameter* p : params) {
      if (!p->trainable || p->grad.size() == 0) {
        p->zero_grad();
        continue;
      }
      if (p->adam_m.size() == 0) {
        p->adam_m = Mat::Zero(p->value.rows(), p->value.cols());
        p->adam_v = Mat::Zero(p->value.rows(), p->value.cols());
      }
      const Mat g = p->grad * factor;
      p->adam_m = config_.beta1 * p->adam_m + (1.0 - config_.beta1) * g;
      p->adam_v = config_.beta2 * p->adam_v + (1.0 - config_.beta2) * g.cwiseAbs2();
      if (p->weight_decay && config_.weight_decay > 0.0) p->value *= 1.0 - config_.lr * config_.weight_decay;
      p->value.array() -= config_.lr * (p->adam_m.array() / bc1) / ((p->adam_v.array() / bc2).sqrt() + config_.eps);
      p->grad.setZero();
    }
  }

  static void zero_grad(const ParamList& params) {
    for (Parameter* p : params) p->zero_grad();
  }

 private:
  AdamWConfig config_;
  long step_ = 0;
};

}  // namespace melsvc::nn
