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

#include <optional>
#include <string>

#include "melsvc/nn/serialize.hpp"

namespace melsvc::ssl {

inline constexpr long kDefaultFreezeStep = 5000;

/// Training-time state of a backbone. Once frozen it stays frozen and its
/// parameter digest must not change.
struct BackboneHandle {
  std::string model_id;
  bool fine_tune = false;
  bool trainable = false;
  long step_counter = -1;
  long freeze_step = kDefaultFreezeStep;
  std::optional<std::string> frozen_digest;
  std::optional<long> frozen_at;
};

inline BackboneHandle make_handle(std::string model_id, bool fine_tune, long freeze_step = kDefaultFreezeStep) {
  BackboneHandle h;
  h.model_id = std::move(model_id);
  h.fine_tune = fine_tune;
  h.trainable = fine_tune && freeze_step > 0;
  h.freeze_step = freeze_step;
  return h;
}

/// Advances the schedule to `global_step` and applies the resulting
/// trainability to `params`. Verifies the frozen digest on every call.
inline void schedule_step(BackboneHandle& h, long global_step, const nn::ParamList& params) {
  if (global_step < h.step_counter) {
    throw stage_error("schedule", "global step regressed from " + std::to_string(h.step_counter) + " to " +
                                      std::to_string(global_step));
  }
  h.step_counter = global_step;
  const bool want = h.fine_tune && global_step < h.freeze_step && !h.frozen_digest;
  h.trainable = want;
  for (nn::Parameter* p : params) p->trainable = want;
  if (!want) {
    const std::string d = nn::parameter_digest(params);
    if (!h.frozen_digest) {
      h.frozen_digest = d;
      h.frozen_at = global_step;
    } else if (*h.frozen_digest != d) {
      throw stage_error("freeze-violated", "backbone parameters changed after freezing at step " +
                                               std::to_string(*h.frozen_at));
    }
  }
}

}  // namespace melsvc::ssl
