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

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "melsvc/core/error.hpp"
#include "melsvc/core/random.hpp"

namespace melsvc::nn {

using Mat = Eigen::MatrixXd;

/// A learnable matrix with its gradient accumulator and AdamW moments.
struct Parameter {
  std::string name;
  Mat value;
  Mat grad;
  Mat adam_m;
  Mat adam_v;
  bool trainable = true;
  bool weight_decay = true;

  Parameter() = default;
  Parameter(std::string n, Mat v, bool decay = true)
      : name(std::move(n)), value(std::move(v)), weight_decay(decay) {}

  void zero_grad() {
    if (grad.size() != 0) grad.setZero();
  }
};

class Tape;

/// Handle to a node recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Mat& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
};

/// Reverse-mode autodiff over dense matrices.
///
/// One tape records one forward pass. `backward` seeds a 1x1 output with 1
/// and propagates to every node that needs a gradient; `flush_param_grads`
/// then adds leaf gradients into the owning Parameters. Tapes are confined
/// to one thread.
class Tape {
 public:
  using Backward = std::function<void(Tape&, int)>;

  explicit Tape(bool grad_enabled = true, bool training = false, Rng* rng = nullptr)
      : grad_enabled_(grad_enabled), training_(training), rng_(rng) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const { return grad_enabled_; }
  bool training() const { return training_; }
  Rng* rng() const { return rng_; }

  Var constant(Mat m) { return push(std::move(m), false, nullptr); }

  /// Leaf for a parameter; repeated calls within a tape share one node.
  Var param(Parameter& p) {
    if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return {this, it->second};
    Node n;
    n.external = &p.value;
    n.needs_grad = grad_enabled_ && p.trainable;
    n.param = &p;
    nodes_.push_back(std::move(n));
    const int id = static_cast<int>(nodes_.size()) - 1;
    param_nodes_.emplace(&p, id);
    return {this, id};
  }

  /// Records an op result. `backward` runs only if the node needs a gradient.
  Var push(Mat value, bool needs_grad, Backward backward) {
    Node n;
    n.own = std::move(value);
    n.needs_grad = grad_enabled_ && needs_grad;
    if (n.needs_grad) n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return {this, static_cast<int>(nodes_.size()) - 1};
  }

  const Mat& value(int id) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    return n.external ? *n.external : n.own;
  }
  bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }
  const Mat& grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }

  /// Adds `g` into the gradient of node `id` if it needs one.
  template <typename Derived>
  void accumulate(int id, const Eigen::MatrixBase<Derived>& g) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.needs_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  void backward(Var root) {
    if (root.tape != this) throw stage_error("autograd", "backward on a foreign tape");
    if (value(root.id).size() != 1) throw stage_error("autograd", "backward needs a scalar root");
    if (!needs_grad(root.id)) return;
    accumulate(root.id, Mat::Ones(1, 1));
    for (int i = root.id; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.needs_grad && n.backward && n.grad.size() != 0) n.backward(*this, i);
    }
  }

  /// Adds leaf gradients into their Parameters' accumulators.
  void flush_param_grads() {
    for (auto& [p, id] : param_nodes_) {
      const Node& n = nodes_[static_cast<std::size_t>(id)];
      if (!n.needs_grad || n.grad.size() == 0) continue;
      if (p->grad.size() == 0) {
        p->grad = n.grad;
      } else {
        p->grad += n.grad;
      }
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat own;
    const Mat* external = nullptr;
    Mat grad;
    bool needs_grad = false;
    Backward backward;
    Parameter* param = nullptr;
  };

  std::vector<Node> nodes_;
  std::unordered_map<Parameter*, int> param_nodes_;
  bool grad_enabled_;
  bool training_;
  Rng* rng_;
};

inline const Mat& Var::value() const { return tape->value(id); }

}  // namespace melsvc::nn
