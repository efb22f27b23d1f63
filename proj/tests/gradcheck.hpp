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

// Central-difference gradient oracle for the autograd tape.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "melsvc/nn/layers.hpp"

namespace melsvc::test {

struct GradCheckResult {
  double worst_relative_error = 0.0;
  std::string worst_parameter;
};

using ScalarFn = std::function<nn::Var(nn::Tape&)>;

/// Compares tape gradients of `fn` w.r.t. each parameter in `params` with
/// central differences. Relative error is ||a - n|| / max(||a|| + ||n||, 1e-6)
/// per parameter. The 1e-6 floor makes analytically vanishing gradients
/// (such as attention key biases) compare absolutely.
inline GradCheckResult gradient_check(const ScalarFn& fn, const nn::ParamList& params, double h = 1e-6) {
  for (auto* p : params) p->grad = nn::Mat::Zero(p->value.rows(), p->value.cols());
  {
    nn::Tape tape(true, false);
    nn::Var out = fn(tape);
    tape.backward(out);
    tape.flush_param_grads();
  }
  auto eval = [&] {
    nn::Tape tape(false, false);
    return fn(tape).scalar();
  };
  GradCheckResult result;
  for (auto* p : params) {
    nn::Mat numeric(p->value.rows(), p->value.cols());
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      const double saved = p->value(i);
      p->value(i) = saved + h;
      const double up = eval();
      p->value(i) = saved - h;
      const double down = eval();
      p->value(i) = saved;
      numeric(i) = (up - down) / (2.0 * h);
    }
    const double denom = std::max(p->grad.norm() + numeric.norm(), 1e-6);
    const double rel = (p->grad - numeric).norm() / denom;
    if (rel > result.worst_relative_error) {
      result.worst_relative_error = rel;
      result.worst_parameter = p->name;
    }
  }
  return result;
}

/// Smooth scalar read-out: mean of out .* w for a fixed random w.
inline nn::Var project(nn::Tape& t, nn::Var out, const nn::Mat& w) {
  return nn::mean_all(nn::mul(out, t.constant(w)));
}

}  // namespace melsvc::test
