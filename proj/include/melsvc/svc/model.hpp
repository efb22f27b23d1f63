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

#include <Eigen/SVD>

#include "melsvc/nn/layers.hpp"
#include "melsvc/svc/content.hpp"

namespace melsvc::svc {

using nn::Var;

/// What the melody encoder consumes: exported melody features (T x 256), or
/// the baseline's raw (log-f0, voicing, log-energy) frames (T x 3).
enum class MelodyInput { features, raw_pitch_energy };

inline MelodyInput parse_melody_input(const std::string& s) {
  if (s == "features") return MelodyInput::features;
  if (s == "raw") return MelodyInput::raw_pitch_energy;
  throw config_error("melody-input", "unknown melody input '" + s + "'");
}
inline std::string to_string(MelodyInput m) { return m == MelodyInput::features ? "features" : "raw"; }

struct SvcConfig {
  nn::FFTBlockConfig encoder{.num_blocks = 4, .model_dim = 256, .attention_heads = 2, .conv_kernel = 9,
                             .filter_dim = 1024, .dropout = 0.1};
  nn::FFTBlockConfig decoder{.num_blocks = 4, .model_dim = 256, .attention_heads = 2, .conv_kernel = 9,
                             .filter_dim = 1024, .dropout = 0.1};
  MelodyInput melody_input = MelodyInput::features;
  int melody_dim = 256;  // width of exported melody features
  int n_mels = 80;
  int disc_channels = 64;
  int disc_layers = 3;
  double lambda_rf = 1.0;
  double lambda_cv = 1.0;
  double lambda_emb = 0.1;
};

/// y = gamma * (x - mean_t x) / (std_t x + 1e-5) + beta per channel, with a
/// single learned (gamma, beta) for the one target singer.
struct ConditionalInstanceNorm {
  nn::Parameter gamma;
  nn::Parameter beta;

  ConditionalInstanceNorm() = default;
  ConditionalInstanceNorm(const std::string& name, Eigen::Index dim)
      : gamma(name + ".gamma", Mat::Ones(1, dim), false), beta(name + ".beta", Mat::Zero(1, dim), false) {}

  Var operator()(nn::Tape& t, Var x) { return nn::instance_norm_time(x, t.param(gamma), t.param(beta)); }
  void params(nn::ParamList& out) {
    out.push_back(&gamma);
    out.push_back(&beta);
  }
};

/// Pure evaluation of the CIN contract on a matrix.
inline Mat cin(const Mat& x, const Eigen::RowVectorXd& gamma, const Eigen::RowVectorXd& beta) {
  nn::Tape t(false);
  return nn::instance_norm_time(t.constant(x), t.constant(gamma), t.constant(beta)).value();
}

struct EncoderOutput {
  Var melody_emb;
  Var content_emb;
};

/// Content and melody encoders (FFT blocks; CIN on the melody path) and a
/// decoder from the concatenated embeddings to an 80-band log-mel.
class Generator {
 public:
  Generator(const SvcConfig& c, std::uint64_t seed) : config_(c) {
    Rng rng(derive_seed(seed, 0x6e17));
    const auto d = c.encoder.model_dim;
    const Eigen::Index melody_in = c.melody_input == MelodyInput::features ? c.melody_dim : 3;
    melody_in_ = nn::Linear("svc.melody_in", melody_in, d, rng);
    melody_enc_ = nn::FFTStack("svc.melody_enc", c.encoder, rng);
    cin_ = ConditionalInstanceNorm("svc.cin", d);
    content_in_ = nn::Linear("svc.content_in", kContentDim, d, rng);
    content_enc_ = nn::FFTStack("svc.content_enc", c.encoder, rng);
    decoder_in_ = nn::Linear("svc.decoder_in", 2 * d, c.decoder.model_dim, rng);
    decoder_ = nn::FFTStack("svc.decoder", c.decoder, rng);
    mel_out_ = nn::Linear("svc.mel_out", c.decoder.model_dim, c.n_mels, rng);
    mel_out_.bias.value.setConstant(-5.0);  // near the log-mel of quiet audio
  }

  const SvcConfig& config() const { return config_; }
  ConditionalInstanceNorm& cin_params() { return cin_; }

  /// Data-dependent start: the output bias becomes the per-band mean log-mel.
  void init_output_bias(const Eigen::RowVectorXd& mean_mel) {
    if (mean_mel.size() != mel_out_.bias.value.cols()) throw data_error("shape", "mean mel has the wrong band count");
    mel_out_.bias.value.row(0) = mean_mel;
  }

  /// Inputs must agree in length within 2 frames; both are trimmed to the shorter.
  EncoderOutput encode(nn::Tape& t, const Mat& melody, const Mat& content) {
    const Eigen::Index n = std::min(melody.rows(), content.rows());
    if (std::abs(melody.rows() - content.rows()) > 2) {
      throw data_error("alignment", "melody has " + std::to_string(melody.rows()) + " frames, content has " +
                                        std::to_string(content.rows()));
    }
    if (n < 2) throw data_error("degenerate-statistics", "encoding needs at least 2 frames");
    Var m = melody_in_(t, t.constant(melody.topRows(n)));
    m = cin_(t, melody_enc_(t, m));
    Var c = content_enc_(t, content_in_(t, t.constant(content.topRows(n))));
    return {m, c};
  }

  Var decode(nn::Tape& t, const EncoderOutput& e) {
    Var x = decoder_in_(t, nn::concat_cols({e.melody_emb, e.content_emb}));
    return mel_out_(t, decoder_(t, x));
  }

  nn::ParamList params() {
    nn::ParamList p;
    melody_in_.params(p);
    melody_enc_.params(p);
    cin_.params(p);
    content_in_.params(p);
    content_enc_.params(p);
    decoder_in_.params(p);
    decoder_.params(p);
    mel_out_.params(p);
    return p;
  }

 private:
  SvcConfig config_;
  nn::Linear melody_in_;
  nn::FFTStack melody_enc_;
  ConditionalInstanceNorm cin_;
  nn::Linear content_in_;
  nn::FFTStack content_enc_;
  nn::Linear decoder_in_;
  nn::FFTStack decoder_;
  nn::Linear mel_out_;
};

/// Strided 1-D convolution stack emitting one score per output frame.
class Discriminator {
 public:
  Discriminator(const std::string& name, Eigen::Index in_dim, int channels, int layers, Rng& rng) {
    Eigen::Index c_in = in_dim;
    for (int l = 0; l < layers; ++l) {
      convs_.emplace_back(name + ".conv" + std::to_string(l), c_in, channels, 3, 2, 1, rng);
      c_in = channels;
    }
    out_ = nn::Conv1d(name + ".out", c_in, 1, 3, 1, 1, rng);
  }

  /// Fixed per-channel offset subtracted from inputs (centres log-mel input).
  void set_input_shift(const Eigen::RowVectorXd& shift) { shift_ = shift; }

  Var operator()(nn::Tape& t, Var x) {
    if (shift_.size() == x.cols()) x = nn::add_const(x, -shift_.replicate(x.rows(), 1));
    for (auto& c : convs_) x = nn::leaky_relu(normalized(t, c, x), 0.2);
    return normalized(t, out_, x);
  }

  nn::ParamList params() {
    nn::ParamList p;
    for (auto& c : convs_) c.params(p);
    out_.params(p);
    return p;
  }

 private:
  /// Spectral normalisation: weights divided by their largest singular value,
  /// which is held constant in the backward pass. Bounds each layer's
  /// Lipschitz constant so adversarial gradients cannot swamp reconstruction.
  static Var normalized(nn::Tape& t, nn::Conv1d& c, Var x) {
    const double sigma = Eigen::JacobiSVD<Mat>(c.weight.value).singularValues()(0);
    const Var w = nn::scale(t.param(c.weight), 1.0 / std::max(sigma, 1e-12));
    return nn::conv1d(x, w, t.param(c.bias), c.kernel, c.stride, c.pad);
  }

  std::vector<nn::Conv1d> convs_;
  nn::Conv1d out_;
  Eigen::RowVectorXd shift_;
};

/// Real/fake and conversion discriminators over mel, embedding
/// discriminator over melody embeddings.
struct Discriminators {
  Discriminator rf;
  Discriminator cv;
  Discriminator emb;

  Discriminators(const SvcConfig& c, std::uint64_t seed)
      : Discriminators(c, Rng(derive_seed(seed, 0xd15c))) {}

  nn::ParamList params() {
    nn::ParamList p = rf.params();
    for (auto* q : cv.params()) p.push_back(q);
    for (auto* q : emb.params()) p.push_back(q);
    return p;
  }

 private:
  Discriminators(const SvcConfig& c, Rng&& rng)
      : rf("svc.d_rf", c.n_mels, c.disc_channels, c.disc_layers, rng),
        cv("svc.d_cv", c.n_mels, c.disc_channels, c.disc_layers, rng),
        emb("svc.d_emb", c.encoder.model_dim, c.disc_channels, c.disc_layers, rng) {}
};

}  // namespace melsvc::svc
