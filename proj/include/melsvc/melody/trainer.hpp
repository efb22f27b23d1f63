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
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "melsvc/dsp/mix.hpp"
#include "melsvc/melody/loss.hpp"
#include "melsvc/nn/adamw.hpp"

namespace melsvc::melody {

/// A clean training vocal and its fused pitch label on the mel grid.
struct TrainItem {
  AudioClip clip;
  FrameTrack label;
};

struct TrainConfig {
  long steps = 10000;
  int batch_size = 8;
  double crop_seconds = 3.0;
  double bgm_prob = 0.5;
  dsp::SnrRange snr{};
  nn::AdamWConfig optimizer{};  // lr 2e-5 by default
  bool cosine_decay = false;    // anneal lr to zero over `steps`
  long freeze_step = ssl::kDefaultFreezeStep;
  int log_every = 100;
  std::uint64_t seed = 0;
};

struct StepLog {
  long step = 0;
  LossComponents loss;
};

struct WeightLog {
  long step = 0;
  std::vector<double> effective;
};

struct TrainHistory {
  std::vector<StepLog> losses;  // one per step, batch means
  std::vector<WeightLog> weights;
};

/// Called after each optimizer update with the number of completed steps.
using StepCallback = std::function<void(long completed_steps, MelodyModel&)>;

/// Fits pitch and energy standardization on the training corpus.
inline void fit_normalizers(MelodyModel& model, const std::vector<TrainItem>& items) {
  std::vector<double> pitches, energies;
  for (const auto& it : items) {
    for (std::size_t i = 0; i < it.label.size(); ++i) {
      if (it.label.vuv[i]) pitches.push_back(log2_pitch(it.label.f0_hz[i]));
    }
    for (double e : dsp::rms_energy(it.clip).values) energies.push_back(log_energy(e));
  }
  model.pitch_norm() = Standardizer::fit(pitches);
  model.energy_norm() = Standardizer::fit(energies);
}

/// Which parameters update: projection and heads always; layer logits only
/// with the weighted sum; the backbone through the freeze schedule.
inline void apply_condition_trainability(MelodyModel& model) {
  nn::set_trainable(model.head_params(), true);
  model.layer_weights().logits.trainable = model.condition().weighted_sum;
}

inline WeightLog snapshot_weights(MelodyModel& model, long step) {
  const Eigen::RowVectorXd e = model.layer_weights().effective();
  if (model.layer_weights().mode == ssl::WeightMode::softmax && std::abs(e.sum() - 1.0) > 1e-6) {
    throw stage_error("simplex", "layer weights left the simplex at step " + std::to_string(step));
  }
  return {step, std::vector<double>(e.data(), e.data() + e.size())};
}

inline TrainHistory train_melody(MelodyModel& model, const std::vector<TrainItem>& items,
                                 std::span<const AudioClip> bgm_pool, const TrainConfig& cfg,
                                 ssl::BackboneHandle& handle, const StepCallback& on_step = {}) {
  if (items.empty()) throw data_error("empty-corpus", "melody training needs at least one labelled clip");
  for (const auto& it : items) {
    const auto frames = dsp::mel_frame_count(it.clip.size());
    if (frames == 0 || std::abs(static_cast<long>(frames) - static_cast<long>(it.label.size())) > kFrameSlack) {
      throw data_error("alignment", "label of clip '" + it.clip.source_id + "' has " + std::to_string(it.label.size()) +
                                        " frames, clip has " + std::to_string(frames));
    }
  }
  fit_normalizers(model, items);
  apply_condition_trainability(model);
  handle.fine_tune = model.condition().fine_tune;
  handle.freeze_step = cfg.freeze_step;

  std::vector<dsp::EnergyTrack> energies;
  energies.reserve(items.size());
  for (const auto& it : items) energies.push_back(dsp::rms_energy(it.clip));

  Rng rng(derive_seed(cfg.seed, 0x7a1));
  nn::AdamW opt(cfg.optimizer);
  const nn::ParamList params = model.all_params();
  const nn::ParamList backbone_params = model.backbone().params();
  const dsp::MelConfig grid;
  const auto crop = static_cast<std::size_t>(std::max(cfg.crop_seconds, 0.05) * kCanonicalRate);
  TrainHistory history;
  history.weights.push_back(snapshot_weights(model, 0));

  for (long step = 0; step < cfg.steps; ++step) {
    ssl::schedule_step(handle, step, backbone_params);
    nn::AdamW::zero_grad(params);
    StepLog log{step, {}};
    for (int b = 0; b < cfg.batch_size; ++b) {
      const std::size_t idx = rng.below(items.size());
      const TrainItem& item = items[idx];
      std::size_t offset = 0, len = item.clip.size();
      if (len > crop) {
        offset = grid.hop_samples * rng.below((len - crop) / grid.hop_samples + 1);
        len = crop;
      }
      AudioClip vocal;
      vocal.source_id = item.clip.source_id;
      vocal.samples.assign(item.clip.samples.begin() + static_cast<std::ptrdiff_t>(offset),
                           item.clip.samples.begin() + static_cast<std::ptrdiff_t>(offset + len));
      const std::size_t first = offset / grid.hop_samples;
      const std::size_t frames = dsp::mel_frame_count(len);
      FrameTrack label = FrameTrack::unvoiced(frames);
      dsp::EnergyTrack energy;
      energy.values.assign(frames, 0.0);
      for (std::size_t i = 0; i < frames; ++i) {
        const std::size_t src = std::min(first + i, item.label.size() - 1);
        label.vuv[i] = item.label.vuv[src];
        label.f0_hz[i] = item.label.f0_hz[src];
        energy.values[i] = energies[idx].values[std::min(first + i, energies[idx].values.size() - 1)];
      }
      const auto aug = cfg.bgm_prob > 0.0 ? dsp::apply_bgm_augmentation(vocal, bgm_pool, cfg.bgm_prob, cfg.snr, rng)
                                          : dsp::Augmentation{vocal, false, 0.0, 0};
      const MelodyTargets target = make_targets(label, energy, model.pitch_norm(), model.energy_norm());

      nn::Tape tape(true, true, &rng);
      const auto out = model.forward(tape, aug.clip);
      LossComponents parts;
      const Var loss = melody_loss(out.heads, target, model.config(), parts, item.clip.source_id);
      if (!std::isfinite(parts.total)) throw stage_error("non-finite-loss", "melody loss is not finite at step " + std::to_string(step));
      tape.backward(nn::scale(loss, 1.0 / cfg.batch_size));
      tape.flush_param_grads();
      const double w = 1.0 / cfg.batch_size;
      log.loss.total += w * parts.total;
      log.loss.pitch += w * parts.pitch;
      log.loss.energy += w * parts.energy;
      log.loss.vuv += w * parts.vuv;
      log.loss.pitch_skipped = log.loss.pitch_skipped || parts.pitch_skipped;
    }
    if (cfg.cosine_decay)
      opt.set_lr(cfg.optimizer.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / cfg.steps)));
    opt.step(params);
    history.losses.push_back(log);
    if (cfg.log_every > 0 && (step + 1) % cfg.log_every == 0) history.weights.push_back(snapshot_weights(model, step + 1));
    if (on_step) on_step(step + 1, model);
  }
  ssl::schedule_step(handle, cfg.steps, backbone_params);
  if (history.weights.back().step != cfg.steps) history.weights.push_back(snapshot_weights(model, cfg.steps));
  return history;
}

/// Mean absolute pitch error in Hz over frames voiced in the label, using the
/// model's predicted f0 (unvoiced predictions count with their pitch value).
inline double voiced_pitch_mae_hz(MelodyModel& model, const std::vector<TrainItem>& items) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& it : items) {
    const MelodyPrediction p = model.infer(it.clip).second;
    const std::size_t frames = std::min(p.pitch.size(), it.label.size());
    for (std::size_t i = 0; i < frames; ++i) {
      if (!it.label.vuv[i]) continue;
      const double f0 = kReferenceHz * std::exp2(model.pitch_norm().inverse(p.pitch[i]));
      sum += std::abs(f0 - it.label.f0_hz[i]);
      ++n;
    }
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

}  // namespace melsvc::melody
