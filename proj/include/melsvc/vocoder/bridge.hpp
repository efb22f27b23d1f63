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

#include <cstdlib>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "melsvc/core/matrix_file.hpp"
#include "melsvc/data/ingest.hpp"
#include "melsvc/vocoder/fallback.hpp"

namespace melsvc::vocoder {

enum class VocoderKind { fallback_phase_recovery, external_neural };

inline std::string to_string(VocoderKind k) {
  return k == VocoderKind::fallback_phase_recovery ? "fallback" : "external";
}

inline VocoderKind parse_vocoder_kind(const std::string& s) {
  if (s == "fallback" || s == "fallback_phase_recovery") return VocoderKind::fallback_phase_recovery;
  if (s == "external" || s == "external_neural") return VocoderKind::external_neural;
  throw config_error("vocoder", "unknown vocoder '" + s + "' (expected fallback|external)");
}

/// `config` for external vocoders:
///   command   executable invoked as `<command> --mel <in.mat> --out <out.wav>`
///   work_dir  scratch directory for the exchange files (default: system temp)
/// The executable reads a log-mel matrix file (T x 80, 50 ms / 10 ms grid)
/// and must write a 16-bit 16 kHz mono WAV.
struct VocoderHandle {
  VocoderKind kind = VocoderKind::fallback_phase_recovery;
  nlohmann::json config = nlohmann::json::object();
};

namespace detail {

inline std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  return out + "'";
}

inline AudioClip run_external(const dsp::MelSpectrogram& mel, const nlohmann::json& cfg) {
  const std::string command = cfg.is_object() ? cfg.value("command", "") : "";
  if (command.empty()) throw config_error("vocoder", "external vocoder needs a 'command'");
  const std::string key = hash_samples({mel.frames.data(), static_cast<std::size_t>(mel.frames.size())});
  const std::filesystem::path dir = cfg.contains("work_dir") ? std::filesystem::path(cfg["work_dir"].get<std::string>())
                                                             : std::filesystem::temp_directory_path() / ("melsvc-voc-" + key);
  std::filesystem::create_directories(dir);
  const auto in = dir / "mel.mat", out = dir / "audio.wav";
  std::filesystem::remove(out);
  write_matrix_file(in, mel.frames);
  const std::string cmd = command + " --mel " + shell_quote(in.string()) + " --out " + shell_quote(out.string());
  if (const int rc = std::system(cmd.c_str()); rc != 0) {
    throw stage_error("vocoder", "external vocoder exited with status " + std::to_string(rc));
  }
  if (!std::filesystem::exists(out)) throw stage_error("vocoder", "external vocoder wrote no " + out.string());
  const wav::Decoded d = wav::read(out);
  if (d.sample_rate != kCanonicalRate || d.channels != 1) {
    throw stage_error("vocoder", "external vocoder output must be 16 kHz mono");
  }
  return ingest(out);
}

}  // namespace detail

/// Waveform for a log-mel spectrogram on the canonical grid. Output length is
/// within one frame of T * hop.
inline AudioClip synthesize(const dsp::MelSpectrogram& mel, const VocoderHandle& vocoder = {}) {
  const dsp::MelConfig grid;
  check_grid(mel, grid);
  if (!vocoder.config.is_object() && !vocoder.config.is_null()) throw config_error("vocoder", "vocoder config must be an object");
  AudioClip out;
  if (vocoder.kind == VocoderKind::fallback_phase_recovery) {
    FallbackConfig fc;
    if (vocoder.config.is_object()) {
      fc.phase_iterations = vocoder.config.value("phase_iterations", fc.phase_iterations);
      fc.nnls_iterations = vocoder.config.value("nnls_iterations", fc.nnls_iterations);
    }
    out = fallback_synthesize(mel, fc);
  } else {
    out = detail::run_external(mel, vocoder.config);
  }
  const auto expected = static_cast<double>(mel.frames.rows() * grid.hop_samples);
  if (std::abs(static_cast<double>(out.size()) - expected) > static_cast<double>(grid.frame_samples)) {
    throw stage_error("vocoder", "vocoder produced " + std::to_string(out.size()) + " samples for " +
                                     std::to_string(mel.frames.rows()) + " frames");
  }
  return out;
}

}  // namespace melsvc::vocoder
