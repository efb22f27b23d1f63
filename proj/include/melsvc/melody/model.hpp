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
#include <memory>
#include <string>
#include <vector>

#include "melsvc/dsp/features.hpp"
#include "melsvc/melody/condition.hpp"
#include "melsvc/pitch/frame_track.hpp"
#include "melsvc/ssl/align.hpp"
#include "melsvc/ssl/factory.hpp"
#include "melsvc/ssl/schedule.hpp"
#include "melsvc/ssl/weighted_sum.hpp"

namespace melsvc::melody {

using nn::Mat;
using nn::Var;

inline constexpr double kReferenceHz = 440.0;
inline constexpr double kGridHopMs = 10.0;
inline constexpr double kEnergyFloor = 1e-5;

struct MelodyFeatures {
  Mat frames;  // T x model_dim
  double hop_ms = kGridHopMs;
};

struct MelodyPrediction {
  std::vector<double> pitch;     // standardized log2(f0 / 440)
  std::vector<double> energy;    // log RMS
  std::vector<double> vuv_prob;  // in [0, 1]
};

/// Affine standardization (x - mean) / std.
struct Standardizer {
  double mean = 0.0;
  double std = 1.0;

  double forward(double x) const { return (x - mean) / std; }
  double inverse(double z) const { return z * std + mean; }

  static Standardizer fit(const std::vector<double>& xs) {
    Standardizer s;
    if (xs.empty()) return s;
    double m = 0.0;
    for (double x : xs) m += x;
    m /= static_cast<double>(xs.size());
    double v = 0.0;
    for (double x : xs) v += (x - m) * (x - m);
    v /= static_cast<double>(xs.size());
    s.mean = m;
    s.std = v > 1e-12 ? std::sqrt(v) : 1.0;
    return s;
  }
};

inline double log2_pitch(double f0_hz) { return std::log2(f0_hz / kReferenceHz); }
inline double log_energy(double rms) { return std::log(std::max(rms, kEnergyFloor)); }

struct MelodyConfig {
  nn::FFTBlockConfig fft{.num_blocks = 4, .model_dim = 256, .attention_heads = 2, .conv_kernel = 9,
                         .filter_dim = 1024, .dropout = 0.1};
  ssl::WeightMode weight_mode = ssl::WeightMode::softmax;
  double lambda_pitch = 1.0;
  double lambda_energy = 0.5;
  double lambda_vuv = 0.5;
};

/// SSL layers -> (weighted sum | last layer) -> 10 ms grid -> projection ->
/// (FFT blocks) -> heads for pitch, energy and a voicing logit.
class MelodyModel {
 public:
  struct Output {
    Var features;  // T x model_dim
    Var heads;     // T x 3: pitch, energy, voicing logit
  };

  MelodyModel(ssl::BackbonePtr backbone, AblationCondition condition, MelodyConfig config, std::uint64_t seed)
      : backbone_(std::move(backbone)), condition_(std::move(condition)), config_(config), seed_(seed) {
    if (!backbone_) throw config_error("backbone", "melody model needs a backbone");
    Rng rng(derive_seed(seed, 0x3e10d1));
    const auto dim = config_.fft.model_dim;
    weights_ = ssl::LayerWeights(backbone_->num_layers() + 1, config_.weight_mode);
    input_ = nn::Linear("melody.input", backbone_->dim(), dim, rng);
    if (condition_.fft_blocks) fft_ = nn::FFTStack("melody.fft", config_.fft, rng);
    head_ = nn::Linear("melody.head", dim, 3, rng);
    weights_.logits.trainable = condition_.weighted_sum;
  }

  ssl::Backbone& backbone() { return *backbone_; }
  const AblationCondition& condition() const { return condition_; }
  const MelodyConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }
  ssl::LayerWeights& layer_weights() { return weights_; }
  Standardizer& pitch_norm() { return pitch_norm_; }
  Standardizer& energy_norm() { return energy_norm_; }
  const Standardizer& pitch_norm() const { return pitch_norm_; }
  const Standardizer& energy_norm() const { return energy_norm_; }

  Output forward(nn::Tape& t, const AudioClip& clip) {
    const auto frames = static_cast<Eigen::Index>(dsp::mel_frame_count(clip.size()));
    if (frames == 0) throw data_error("short-input", "clip '" + clip.source_id + "' is shorter than one mel frame");
    const auto layers = backbone_->forward(t, clip);
    Var agg = condition_.weighted_sum ? ssl::weighted_sum(layers, weights_.effective(t)) : layers.back();
    Var x = input_(t, ssl::align_frames(agg, backbone_->hop_ms(), kGridHopMs, frames));
    if (condition_.fft_blocks) x = fft_(t, x);
    return {x, head_(t, x)};
  }

  /// Evaluation-mode features and predictions.
  std::pair<MelodyFeatures, MelodyPrediction> infer(const AudioClip& clip) {
    nn::Tape t(false, false);
    const Output out = forward(t, clip);
    MelodyFeatures f{out.features.value(), kGridHopMs};
    return {std::move(f), decode_heads(out.heads.value())};
  }

  MelodyFeatures export_features(const AudioClip& clip) { return infer(clip).first; }

  MelodyPrediction decode_heads(const Mat& heads) const {
    MelodyPrediction p;
    const auto n = static_cast<std::size_t>(heads.rows());
    p.pitch.resize(n);
    p.energy.resize(n);
    p.vuv_prob.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      p.pitch[i] = heads(r, 0);
      p.energy[i] = energy_norm_.inverse(heads(r, 1));
      p.vuv_prob[i] = 1.0 / (1.0 + std::exp(-heads(r, 2)));
    }
    return p;
  }

  /// Hz track from a prediction: voiced where vuv_prob > 0.5, clamped to the singing range.
  FrameTrack to_track(const MelodyPrediction& p) const {
    FrameTrack t = FrameTrack::unvoiced(p.pitch.size());
    for (std::size_t i = 0; i < p.pitch.size(); ++i) {
      if (p.vuv_prob[i] <= 0.5) continue;
      t.vuv[i] = true;
      t.f0_hz[i] = std::clamp(kReferenceHz * std::exp2(pitch_norm_.inverse(p.pitch[i])), kMinF0, kMaxF0);
    }
    return t;
  }

  FrameTrack predict_track(const AudioClip& clip) { return to_track(infer(clip).second); }

  nn::ParamList head_params() {
    nn::ParamList p;
    input_.params(p);
    if (condition_.fft_blocks) fft_.params(p);
    head_.params(p);
    return p;
  }
  nn::ParamList fft_params() {
    nn::ParamList p;
    if (condition_.fft_blocks) fft_.params(p);
    return p;
  }
  nn::ParamList all_params() {
    nn::ParamList p = backbone_->params();
    p.push_back(&weights_.logits);
    const auto h = head_params();
    p.insert(p.end(), h.begin(), h.end());
    return p;
  }

 private:
  ssl::BackbonePtr backbone_;
  AblationCondition condition_;
  MelodyConfig config_;
  std::uint64_t seed_;
  ssl::LayerWeights weights_;
  nn::Linear input_;
  nn::FFTStack fft_;
  nn::Linear head_;
  Standardizer pitch_norm_;
  Standardizer energy_norm_;
};

}  // namespace melsvc::melody
