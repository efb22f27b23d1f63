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
#include <vector>

#include "melsvc/core/log.hpp"
#include "melsvc/nn/adamw.hpp"
#include "melsvc/svc/model.hpp"

namespace melsvc::svc {

/// One training clip: melody input, content features and target log-mel on
/// a shared grid.
struct SvcItem {
  Mat melody;
  Mat content;
  Mat mel;
  std::string id;

  Eigen::Index frames() const { return std::min({melody.rows(), content.rows(), mel.rows()}); }
};

struct SvcLossComponents {
  double recon = 0.0;
  double adv_rf = 0.0;
  double adv_cv = 0.0;
  double adv_emb = 0.0;
  double d_rf = 0.0;
  double d_cv = 0.0;
  double d_emb = 0.0;
  double generator_total = 0.0;
  bool out_set_skipped = false;

  bool all_finite() const {
    for (double v : {recon, adv_rf, adv_cv, adv_emb, d_rf, d_cv, d_emb, generator_total}) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }
};

/// Least-squares discriminator objective: mean (D(real) - 1)^2 + mean D(fake)^2.
/// With no fake scores only the real-side term remains.
inline Var lsgan_discriminator_loss(Var real_scores, const Var* fake_scores = nullptr) {
  Var loss = nn::mse_to(real_scores, 1.0);
  if (fake_scores) loss = nn::add(loss, nn::mse_to(*fake_scores, 0.0));
  return loss;
}

/// Generator side of the least-squares objective: mean (D(fake) - 1)^2.
inline Var lsgan_generator_loss(Var fake_scores) { return nn::mse_to(fake_scores, 1.0); }

inline SvcItem crop_item(const SvcItem& item, Eigen::Index start, Eigen::Index frames) {
  return {item.melody.middleRows(start, frames), item.content.middleRows(start, frames),
          item.mel.middleRows(start, frames), item.id};
}

namespace detail {

/// Generator outputs for one clip, kept on its own tape.
struct GenPass {
  std::unique_ptr<nn::Tape> tape;
  EncoderOutput enc;
  Var mel;
};

inline GenPass run_generator(Generator& g, const SvcItem& item, Rng* rng, bool training) {
  GenPass p;
  p.tape = std::make_unique<nn::Tape>(true, training, rng);
  p.enc = g.encode(*p.tape, item.melody, item.content);
  p.mel = g.decode(*p.tape, p.enc);
  return p;
}

inline void backward_scaled(nn::Tape& t, Var loss, double scale) {
  t.backward(nn::scale(loss, scale));
  t.flush_param_grads();
}

}  // namespace detail

/// Alternating adversarial update. The discriminators step first on
/// detached generator outputs; then the generator steps against the updated
/// discriminators, which are held fixed. An empty out-set skips the
/// conversion and embedding terms on both sides.
class AdversarialTrainer {
 public:
  AdversarialTrainer(Generator& g, Discriminators& d, nn::AdamWConfig g_opt, nn::AdamWConfig d_opt)
      : gen_(g), disc_(d), g_opt_(g_opt), d_opt_(d_opt) {}

  SvcLossComponents step(const std::vector<SvcItem>& in_set, const std::vector<SvcItem>& out_set, Rng& rng) {
    if (in_set.empty()) throw data_error("empty-batch", "adversarial step needs in-set clips");
    const nn::ParamList gp = gen_.params(), dp = disc_.params();
    nn::AdamW::zero_grad(gp);
    nn::AdamW::zero_grad(dp);
    SvcLossComponents out;
    out.out_set_skipped = out_set.empty();
    if (out.out_set_skipped) log::warn("empty out-set batch; conversion and embedding terms skipped");

    std::vector<detail::GenPass> in_pass, out_pass;
    for (const auto& it : in_set) in_pass.push_back(detail::run_generator(gen_, it, &rng, true));
    for (const auto& it : out_set) out_pass.push_back(detail::run_generator(gen_, it, &rng, true));

    discriminator_phase(in_set, in_pass, out_pass, out);
    d_opt_.step(dp);
    nn::AdamW::zero_grad(gp);
    generator_phase(in_set, in_pass, out_pass, out);
    g_opt_.step(gp);
    return out;
  }

  /// Discriminator half of a step on its own: updates only the discriminators.
  SvcLossComponents discriminator_update(const std::vector<SvcItem>& in_set, const std::vector<SvcItem>& out_set,
                                         Rng& rng) {
    const nn::ParamList dp = disc_.params();
    nn::AdamW::zero_grad(dp);
    SvcLossComponents out;
    out.out_set_skipped = out_set.empty();
    std::vector<detail::GenPass> in_pass, out_pass;
    for (const auto& it : in_set) in_pass.push_back(detail::run_generator(gen_, it, &rng, true));
    for (const auto& it : out_set) out_pass.push_back(detail::run_generator(gen_, it, &rng, true));
    discriminator_phase(in_set, in_pass, out_pass, out);
    d_opt_.step(dp);
    return out;
  }

  /// Generator gradients only (no update), for inspection.
  SvcLossComponents generator_gradients(const std::vector<SvcItem>& in_set, const std::vector<SvcItem>& out_set,
                                        Rng& rng) {
    nn::AdamW::zero_grad(gen_.params());
    SvcLossComponents out;
    out.out_set_skipped = out_set.empty();
    std::vector<detail::GenPass> in_pass, out_pass;
    for (const auto& it : in_set) in_pass.push_back(detail::run_generator(gen_, it, &rng, true));
    for (const auto& it : out_set) out_pass.push_back(detail::run_generator(gen_, it, &rng, true));
    generator_phase(in_set, in_pass, out_pass, out);
    return out;
  }

  const SvcConfig& config() const { return gen_.config(); }

 private:
  void discriminator_phase(const std::vector<SvcItem>& in_set, const std::vector<detail::GenPass>& in_pass,
                           const std::vector<detail::GenPass>& out_pass, SvcLossComponents& out) {
    const double n_in = static_cast<double>(in_set.size());
    const double n_out = static_cast<double>(out_pass.size());
    for (std::size_t i = 0; i < in_set.size(); ++i) {
      nn::Tape t(true, true);
      const Eigen::Index n = in_pass[i].mel.rows();
      Var fake = disc_.rf(t, t.constant(in_pass[i].mel.value()));
      Var rf = lsgan_discriminator_loss(disc_.rf(t, t.constant(in_set[i].mel.topRows(n))), &fake);
      detail::backward_scaled(t, rf, 1.0 / n_in);
      out.d_rf += rf.scalar() / n_in;
      if (out.out_set_skipped) continue;
      nn::Tape tc(true, true);
      Var cv = nn::mse_to(disc_.cv(tc, tc.constant(in_pass[i].mel.value())), 1.0);
      Var emb = nn::mse_to(disc_.emb(tc, tc.constant(in_pass[i].enc.melody_emb.value())), 1.0);
      detail::backward_scaled(tc, nn::add(cv, emb), 1.0 / n_in);
      out.d_cv += cv.scalar() / n_in;
      out.d_emb += emb.scalar() / n_in;
    }
    for (std::size_t j = 0; j < out_pass.size(); ++j) {
      nn::Tape t(true, true);
      Var cv = nn::mse_to(disc_.cv(t, t.constant(out_pass[j].mel.value())), 0.0);
      Var emb = nn::mse_to(disc_.emb(t, t.constant(out_pass[j].enc.melody_emb.value())), 0.0);
      detail::backward_scaled(t, nn::add(cv, emb), 1.0 / n_out);
      out.d_cv += cv.scalar() / n_out;
      out.d_emb += emb.scalar() / n_out;
    }
  }

  void generator_phase(const std::vector<SvcItem>& in_set, std::vector<detail::GenPass>& in_pass,
                       std::vector<detail::GenPass>& out_pass, SvcLossComponents& out) {
    const SvcConfig& c = gen_.config();
    const nn::ParamList dp = disc_.params();
    std::vector<bool> saved;
    for (auto* p : dp) {
      saved.push_back(p->trainable);
      p->trainable = false;
    }
    const double n_in = static_cast<double>(in_set.size());
    for (std::size_t i = 0; i < in_set.size(); ++i) {
      nn::Tape& t = *in_pass[i].tape;
      const Eigen::Index n = in_pass[i].mel.rows();
      Var recon = nn::l1_loss(in_pass[i].mel, in_set[i].mel.topRows(n));
      Var adv = lsgan_generator_loss(disc_.rf(t, in_pass[i].mel));
      Var total = nn::weighted_sum_scalars({{recon, 1.0}, {adv, c.lambda_rf}});
      detail::backward_scaled(t, total, 1.0 / n_in);
      out.recon += recon.scalar() / n_in;
      out.adv_rf += adv.scalar() / n_in;
    }
    if (!out_pass.empty()) {
      const double n_out = static_cast<double>(out_pass.size());
      for (auto& p : out_pass) {
        nn::Tape& t = *p.tape;
        Var cv = lsgan_generator_loss(disc_.cv(t, p.mel));
        Var emb = lsgan_generator_loss(disc_.emb(t, p.enc.melody_emb));
        detail::backward_scaled(t, nn::weighted_sum_scalars({{cv, c.lambda_cv}, {emb, c.lambda_emb}}), 1.0 / n_out);
        out.adv_cv += cv.scalar() / n_out;
        out.adv_emb += emb.scalar() / n_out;
      }
    }
    out.generator_total = out.recon + c.lambda_rf * out.adv_rf + c.lambda_cv * out.adv_cv + c.lambda_emb * out.adv_emb;
    for (std::size_t k = 0; k < dp.size(); ++k) dp[k]->trainable = saved[k];
  }

  Generator& gen_;
  Discriminators& disc_;
  nn::AdamW g_opt_;
  nn::AdamW d_opt_;
};

struct SvcTrainConfig {
  long steps = 10000;
  int in_batch = 4;
  int out_batch = 4;
  Eigen::Index crop_frames = 300;
  nn::AdamWConfig generator_opt{.lr = 1e-4};
  nn::AdamWConfig discriminator_opt{.lr = 1e-4};
  std::uint64_t seed = 0;
};

inline std::vector<SvcItem> sample_batch(const std::vector<SvcItem>& pool, int count, Eigen::Index crop, Rng& rng) {
  std::vector<SvcItem> batch;
  if (pool.empty()) return batch;
  for (int b = 0; b < count; ++b) {
    const SvcItem& it = pool[rng.below(pool.size())];
    const Eigen::Index n = it.frames();
    if (n <= crop) {
      batch.push_back(crop_item(it, 0, n));
    } else {
      const auto start = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n - crop + 1)));
      batch.push_back(crop_item(it, start, crop));
    }
  }
  return batch;
}

using SvcStepCallback = std::function<void(long completed_steps, const SvcLossComponents&)>;

inline std::vector<SvcLossComponents> train_svc(Generator& g, Discriminators& d, const std::vector<SvcItem>& in_set,
                                                const std::vector<SvcItem>& out_set, const SvcTrainConfig& cfg,
                                                const SvcStepCallback& on_step = {}) {
  if (in_set.empty()) throw data_error("empty-corpus", "SVC training needs in-set clips");
  Eigen::RowVectorXd mean_mel = Eigen::RowVectorXd::Zero(in_set[0].mel.cols());
  double frames = 0.0;
  for (const auto& it : in_set) {
    mean_mel += it.mel.colwise().sum();
    frames += static_cast<double>(it.mel.rows());
  }
  mean_mel /= frames;
  g.init_output_bias(mean_mel);
  d.rf.set_input_shift(mean_mel);
  d.cv.set_input_shift(mean_mel);
  Rng rng(derive_seed(cfg.seed, 0x5bc));
  AdversarialTrainer trainer(g, d, cfg.generator_opt, cfg.discriminator_opt);
  std::vector<SvcLossComponents> history;
  history.reserve(static_cast<std::size_t>(cfg.steps));
  for (long s = 0; s < cfg.steps; ++s) {
    const auto in_b = sample_batch(in_set, cfg.in_batch, cfg.crop_frames, rng);
    const auto out_b = sample_batch(out_set, cfg.out_batch, cfg.crop_frames, rng);
    history.push_back(trainer.step(in_b, out_b, rng));
    if (!history.back().all_finite()) throw stage_error("non-finite-loss", "SVC loss not finite at step " + std::to_string(s));
    if (on_step) on_step(s + 1, history.back());
  }
  return history;
}

}  // namespace melsvc::svc
