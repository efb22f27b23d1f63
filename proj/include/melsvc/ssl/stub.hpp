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
#include <numbers>

#include "melsvc/core/random.hpp"
#include "melsvc/nn/layers.hpp"
#include "melsvc/ssl/backbone.hpp"

namespace melsvc::ssl {

struct StubConfig {
  int num_layers = 4;
  int dim = 32;
  int heads = 2;
  int filter_dim = 64;
  int filters = 48;
  double f_lo = 50.0;
  double f_hi = 2000.0;
  std::size_t window = 640;
  std::size_t hop = 320;
  std::uint64_t seed = 0;
  /// Replace encoder layers with the identity (every layer equals layer 0).
  bool identity_layers = false;
};

/// Seedable stand-in for a pretrained speech model.
///
/// Front-end: a fixed bank of complex Gabor filters (log-spaced centre
/// frequencies, Hann envelope) evaluated on 40 ms windows every 20 ms, log
/// compressed, then a learned projection to D. Encoder: randomly
/// initialized transformer layers with pointwise feed-forwards.
class StubBackbone final : public Backbone {
 public:
  explicit StubBackbone(StubConfig c = {}) : config_(c) {
    if (c.num_layers < 1) throw config_error("backbone", "stub backbone needs at least one layer");
    Rng rng(derive_seed(c.seed, 0x5575));
    bank_ = gabor_bank(c);
    frontend_ = nn::Linear("backbone.frontend", c.filters, c.dim, rng);
    nn::FFTBlockConfig bc{.num_blocks = c.num_layers,
                          .model_dim = c.dim,
                          .attention_heads = c.heads,
                          .conv_kernel = 1,
                          .filter_dim = c.filter_dim,
                          .dropout = 0.0};
    encoder_.reserve(static_cast<std::size_t>(c.num_layers));
    for (int l = 0; l < c.num_layers; ++l) encoder_.emplace_back("backbone.layer" + std::to_string(l + 1), bc, rng);
  }

  std::string kind() const override { return "stub"; }
  std::string model_id() const override { return "stub-" + Fnv1a::to_hex(config_.seed) + "-L" + std::to_string(config_.num_layers); }
  int num_layers() const override { return config_.num_layers; }
  Eigen::Index dim() const override { return config_.dim; }
  double hop_ms() const override { return 1000.0 * static_cast<double>(config_.hop) / kCanonicalRate; }
  std::size_t receptive_samples() const override { return config_.window; }
  const StubConfig& config() const { return config_; }

  /// Log Gabor magnitudes, T_ssl x filters. Fixed, so computed outside the tape.
  Mat frontend_features(const AudioClip& clip) const {
    check_clip(clip);
    const std::size_t frames = (clip.size() - config_.window) / config_.hop + 1;
    Mat x(static_cast<Eigen::Index>(frames), static_cast<Eigen::Index>(config_.window));
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t n = 0; n < config_.window; ++n) {
        x(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(n)) = clip.samples[t * config_.hop + n];
      }
    }
    const Mat r = x * bank_;
    const Eigen::Index f = config_.filters;
    Mat out(r.rows(), f);
    for (Eigen::Index i = 0; i < f; ++i) {
      out.col(i) = (r.col(i).array().square() + r.col(f + i).array().square()).sqrt().unaryExpr(
          [](double m) { return std::log(m + 1e-3); });
    }
    return out;
  }

  std::vector<nn::Var> forward(nn::Tape& tape, const AudioClip& clip) override {
    std::vector<nn::Var> layers;
    nn::Var h = frontend_(tape, tape.constant(frontend_features(clip)));
    layers.push_back(h);
    if (!config_.identity_layers) h = nn::add_const(h, nn::positional_encoding(h.rows(), h.cols()));
    for (auto& block : encoder_) {
      if (!config_.identity_layers) h = block(tape, h);
      layers.push_back(h);
    }
    return layers;
  }

  nn::ParamList params() override {
    nn::ParamList p;
    frontend_.params(p);
    for (auto& b : encoder_) b.params(p);
    return p;
  }

  nlohmann::json describe() const override {
    return {{"kind", "stub"},
            {"num_layers", config_.num_layers},
            {"dim", config_.dim},
            {"heads", config_.heads},
            {"filter_dim", config_.filter_dim},
            {"filters", config_.filters},
            {"identity_layers", config_.identity_layers}};
  }

  /// window x (2 * filters): real parts then imaginary parts, unit gain per filter.
  static Mat gabor_bank(const StubConfig& c) {
    Mat bank(static_cast<Eigen::Index>(c.window), 2 * c.filters);
    const double ratio = std::log(c.f_hi / c.f_lo);
    std::vector<double> env(c.window);
    double env_sum = 0.0;
    for (std::size_t n = 0; n < c.window; ++n) {
      env[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * (static_cast<double>(n) + 0.5) / static_cast<double>(c.window));
      env_sum += env[n];
    }
    for (int k = 0; k < c.filters; ++k) {
      const double fk = c.f_lo * std::exp(ratio * k / std::max(1, c.filters - 1));
      for (std::size_t n = 0; n < c.window; ++n) {
        const double phase = 2.0 * std::numbers::pi * fk * static_cast<double>(n) / kCanonicalRate;
        bank(static_cast<Eigen::Index>(n), k) = env[n] * std::cos(phase) / env_sum;
        bank(static_cast<Eigen::Index>(n), c.filters + k) = -env[n] * std::sin(phase) / env_sum;
      }
    }
    return bank;
  }

 private:
  StubConfig config_;
  Mat bank_;
  nn::Linear frontend_;
  std::vector<nn::FFTBlock> encoder_;
};

}  // namespace melsvc::ssl
