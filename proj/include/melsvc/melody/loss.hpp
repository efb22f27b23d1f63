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

#include "melsvc/core/log.hpp"
#include "melsvc/dsp/features.hpp"
#include "melsvc/melody/model.hpp"

namespace melsvc::melody {

inline constexpr Eigen::Index kFrameSlack = 2;

/// Per-frame regression targets on the mel grid.
struct MelodyTargets {
  Eigen::VectorXd pitch;   // standardized log2(f0 / 440); 0 where unvoiced
  Eigen::VectorXd voiced;  // 1 or 0
  Eigen::VectorXd energy;  // standardized log RMS
};

inline MelodyTargets make_targets(const FrameTrack& label, const dsp::EnergyTrack& energy, const Standardizer& pitch_norm,
                                  const Standardizer& energy_norm) {
  const auto n = static_cast<Eigen::Index>(std::min(label.size(), energy.values.size()));
  MelodyTargets t{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    if (label.vuv[k]) {
      t.voiced(i) = 1.0;
      t.pitch(i) = pitch_norm.forward(log2_pitch(label.f0_hz[k]));
    }
    t.energy(i) = energy_norm.forward(log_energy(energy.values[k]));
  }
  return t;
}

struct LossComponents {
  double total = 0.0;
  double pitch = 0.0;
  double energy = 0.0;
  double vuv = 0.0;
  bool pitch_skipped = false;
};

/// lambda_p * L1(pitch | voiced) + lambda_e * L1(energy) + lambda_v * BCE(voicing).
/// Lengths are trimmed to the shorter side; more than kFrameSlack frames of
/// disagreement is a data error naming the clip.
inline Var melody_loss(Var heads, const MelodyTargets& target, const MelodyConfig& cfg, LossComponents& out,
                       const std::string& clip_id = {}) {
  const Eigen::Index n = std::min(heads.rows(), target.pitch.size());
  if (std::abs(heads.rows() - target.pitch.size()) > kFrameSlack) {
    throw data_error("alignment", "clip '" + clip_id + "': " + std::to_string(heads.rows()) + " predicted frames vs " +
                                      std::to_string(target.pitch.size()) + " label frames");
  }
  if (n == 0) throw data_error("alignment", "clip '" + clip_id + "' has no frames to score");
  Var h = heads.rows() == n ? heads : nn::slice_rows(heads, 0, n);
  const Eigen::VectorXd voiced = target.voiced.head(n);

  Var pitch_term = nn::masked_l1(nn::slice_cols(h, 0, 1), target.pitch.head(n), voiced);
  out.pitch_skipped = voiced.sum() == 0.0;
  if (out.pitch_skipped) log::warn("no voiced frames in '" + clip_id + "'; pitch loss skipped");
  Var energy_term = nn::l1_loss(nn::slice_cols(h, 1, 1), target.energy.head(n));
  Var vuv_term = nn::bce_with_logits(nn::slice_cols(h, 2, 1), voiced);
  Var total = nn::weighted_sum_scalars(
      {{pitch_term, cfg.lambda_pitch}, {energy_term, cfg.lambda_energy}, {vuv_term, cfg.lambda_vuv}});
  out.pitch = pitch_term.scalar();
  out.energy = energy_term.scalar();
  out.vuv = vuv_term.scalar();
  out.total = total.scalar();
  return total;
}

}  // namespace melsvc::melody
