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

#include "melsvc/data/ingest.hpp"
#include "melsvc/data/manifest.hpp"
#include "melsvc/dsp/mix.hpp"

namespace melsvc {

/// Clean vocal for an entry, with its playback-speed copy applied.
inline AudioClip load_vocal(const ManifestEntry& e) {
  AudioClip clip = ingest(e.vocal_path);
  if (e.speed != 1.0) clip = dsp::speed_perturb(clip, e.speed);
  return clip;
}

inline std::optional<AudioClip> load_bgm(const ManifestEntry& e) {
  if (!e.bgm_path) return std::nullopt;
  return ingest(*e.bgm_path);
}

}  // namespace melsvc
