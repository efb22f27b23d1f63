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
#include <string>
#include <vector>

#include "melsvc/core/random.hpp"
#include "melsvc/nn/ops.hpp"

namespace melsvc::nn {

using ParamList = std::vector<Parameter*>;

inline Mat random_normal(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng) {
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = rng.normal() * stddev;
  return m;
}

/// Glorot-style normal initialization for a fan_in x fan_out weight.
inline Mat glorot(Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng) {
  return random_normal(fan_in, fan_out, std::sqrt(2.0 / static_cast<double>(fan_in + fan_out)), rng);
}

inline void set_trainable(const ParamList& params, bool trainable) {
  for (Parameter* p : params) p->trainable = trainable;
}

struct Linear {
  Parameter weight;  // in x out
  Parameter bias;    // 1 x out

  Linear() = default;
  Linear(const std::string& name, Eigen::Index in, Eigen::Index out, Rng& rng)
      : weight(name + ".weight", glorot(in, out, rng)), bias(name + ".bias", Mat::Zero(1, out), false) {}

  Var operator()(Tape& t, Var x) { return add_row(matmul(x, t.param(weight)), t.param(bias)); }
  void params(ParamList& out) {
    out.push_back(&weight);
    out.push_back(&bias);
  }
  Eigen::Index in_dim() const { return weight.value.rows(); }
  Eigen::Index out_dim() const { return weight.value.cols(); }
};

struct LayerNorm {
  Parameter gamma;
  Parameter beta;

  LayerNorm() = default;
  LayerNorm(const std::string& name, Eigen::Index dim)
      : gamma(name + ".gamma", Mat::Ones(1, dim), false), beta(name + ".beta", Mat::Zero(1, dim), false) {}

  Var operator()(Tape& t, Var x) { return layer_norm(x, t.param(gamma), t.param(beta)); }
  void params(ParamList& out) {
    out.push_back(&gamma);
    out.push_back(&beta);
  }
};

struct Conv1d {
  Parameter weight;  // (kernel * in) x out
  Parameter bias;
  int kernel = 1;
  int stride = 1;
  int pad = 0;

  Conv1d() = default;
  /// pad < 0 selects "same" padding for stride 1.
  Conv1d(const std::string& name, Eigen::Index in, Eigen::Index out, int k, int s, int p, Rng& rng)
      : weight(name + ".weight", glorot(k * in, out, rng)),
        bias(name + ".bias", Mat::Zero(1, out), false),
        kernel(k),
        stride(s),
        pad(p < 0 ? (k - 1) / 2 : p) {}

  Var operator()(Tape& t, Var x) { return conv1d(x, t.param(weight), t.param(bias), kernel, stride, pad); }
  void params(ParamList& out) {
    out.push_back(&weight);
    out.push_back(&bias);
  }
  Eigen::Index output_frames(Eigen::Index t_in) const { return (t_in + 2 * pad - kernel) / stride + 1; }
};

struct MultiHeadSelfAttention {
  Linear q, k, v, o;
  int heads = 1;

  MultiHeadSelfAttention() = default;
  MultiHeadSelfAttention(const std::string& name, Eigen::Index dim, int n_heads, Rng& rng)
      : q(name + ".q", dim, dim, rng),
        k(name + ".k", dim, dim, rng),
        v(name + ".v", dim, dim, rng),
        o(name + ".o", dim, dim, rng),
        heads(n_heads) {
    if (n_heads <= 0 || dim % n_heads != 0) throw config_error("attention", "model_dim must be divisible by heads");
  }

  Var operator()(Tape& t, Var x, double dropout_p) {
    const Eigen::Index dim = x.cols();
    const Eigen::Index dh = dim / heads;
    const Var qx = q(t, x), kx = k(t, x), vx = v(t, x);
    std::vector<Var> outs;
    outs.reserve(static_cast<std::size_t>(heads));
    const double s = 1.0 / std::sqrt(static_cast<double>(dh));
    for (int h = 0; h < heads; ++h) {
      const Var qh = slice_cols(qx, h * dh, dh);
      const Var kh = slice_cols(kx, h * dh, dh);
      const Var vh = slice_cols(vx, h * dh, dh);
      Var attn = softmax_rows(scale(matmul_nt(qh, kh), s));
      attn = dropout(attn, dropout_p);
      outs.push_back(matmul(attn, vh));
    }
    return o(t, heads == 1 ? outs[0] : concat_cols(outs));
  }
  void params(ParamList& out) {
    q.params(out);
    k.params(out);
    v.params(out);
    o.params(out);
  }
};

struct FFTBlockConfig {
  int num_blocks = 4;
  int model_dim = 256;
  int attention_heads = 2;
  int conv_kernel = 9;
  int filter_dim = 1024;
  double dropout = 0.1;
};

/// Feed-forward Transformer block: self-attention and a two-layer
/// convolutional feed-forward, each residual and post-normalized.
struct FFTBlock {
  MultiHeadSelfAttention attention;
  LayerNorm norm1;
  Conv1d conv1;
  Conv1d conv2;
  LayerNorm norm2;
  double dropout_p = 0.0;

  FFTBlock() = default;
  FFTBlock(const std::string& name, const FFTBlockConfig& c, Rng& rng)
      : attention(name + ".attn", c.model_dim, c.attention_heads, rng),
        norm1(name + ".norm1", c.model_dim),
        conv1(name + ".conv1", c.model_dim, c.filter_dim, c.conv_kernel, 1, -1, rng),
        conv2(name + ".conv2", c.filter_dim, c.model_dim, c.conv_kernel, 1, -1, rng),
        norm2(name + ".norm2", c.model_dim),
        dropout_p(c.dropout) {
    if (c.conv_kernel % 2 == 0) throw config_error("conv-kernel", "FFT block kernel must be odd");
  }

  Var operator()(Tape& t, Var x) {
    Var h = norm1(t, add(x, dropout(attention(t, x, dropout_p), dropout_p)));
    Var f = conv2(t, relu(conv1(t, h)));
    return norm2(t, add(h, dropout(f, dropout_p)));
  }
  void params(ParamList& out) {
    attention.params(out);
    norm1.params(out);
    conv1.params(out);
    conv2.params(out);
    norm2.params(out);
  }
};

/// Sinusoidal positional table, T x D.
inline Mat positional_encoding(Eigen::Index frames, Eigen::Index dim) {
  Mat pe(frames, dim);
  for (Eigen::Index t = 0; t < frames; ++t) {
    for (Eigen::Index i = 0; i < dim; ++i) {
      const double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(dim));
      pe(t, i) = (i % 2 == 0) ? std::sin(static_cast<double>(t) * rate) : std::cos(static_cast<double>(t) * rate);
    }
  }
  return pe;
}

struct FFTStack {
  std::vector<FFTBlock> blocks;
  bool positional = true;

  FFTStack() = default;
  FFTStack(const std::string& name, const FFTBlockConfig& c, Rng& rng, bool use_positional = true)
      : positional(use_positional) {
    blocks.reserve(static_cast<std::size_t>(c.num_blocks));
    for (int i = 0; i < c.num_blocks; ++i) blocks.emplace_back(name + ".block" + std::to_string(i), c, rng);
  }

  Var operator()(Tape& t, Var x) {
    if (positional) x = add_const(x, positional_encoding(x.rows(), x.cols()));
    for (auto& b : blocks) x = b(t, x);
    return x;
  }
  void params(ParamList& out) {
    for (auto& b : blocks) b.params(out);
  }
  bool empty() const { return blocks.empty(); }
};

}  // namespace melsvc::nn
