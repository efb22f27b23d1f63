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

#include <filesystem>
#include <memory>

#include "melsvc/core/matrix_file.hpp"
#include "melsvc/dsp/features.hpp"
#include "melsvc/ssl/align.hpp"
#include "melsvc/ssl/stub.hpp"

namespace melsvc::svc {

using nn::Mat;

inline constexpr Eigen::Index kContentDim = 256;

/// Per-clip content (linguistic) features, T x 256 on the mel grid.
class ContentProvider {
 public:
  virtual ~ContentProvider() = default;
  virtual std::string kind() const = 0;
  virtual Mat content(const AudioClip& clip) = 0;
};

/// Stand-in for ASR bottleneck features: the layer-averaged hidden states of
/// a separately seeded stub backbone, aligned to the mel grid and passed
/// through a fixed random projection. Carries no trained linguistic content.
class StubContentProvider final : public ContentProvider {
 public:
  explicit StubContentProvider(std::uint64_t seed = 0x0c0ffee, ssl::StubConfig backbone = {}) {
    backbone.seed = seed;
    backbone_ = std::make_unique<ssl::StubBackbone>(backbone);
    Rng rng(derive_seed(seed, 0xb9f));
    projection_ = nn::random_normal(backbone.dim, kContentDim, 1.0 / std::sqrt(static_cast<double>(backbone.dim)), rng);
  }

  std::string kind() const override { return "stub"; }

  Mat content(const AudioClip& clip) override {
    const auto frames = static_cast<Eigen::Index>(dsp::mel_frame_count(clip.size()));
    if (frames == 0) throw data_error("short-input", "clip '" + clip.source_id + "' is shorter than one mel frame");
    const auto stack = backbone_->extract(clip);
    Mat mean = Mat::Zero(stack.frames(), stack.dim());
    for (const auto& h : stack.hidden) mean += h;
    mean /= static_cast<double>(stack.hidden.size());
    return ssl::align_frames(mean, stack.frame_hop_ms, 10.0, frames) * projection_;
  }

 private:
  std::unique_ptr<ssl::StubBackbone> backbone_;
  Mat projection_;
};

/// Feature-file contract: <root>/<content hash>.mat holding a T x 256 matrix.
class ExternalContentProvider final : public ContentProvider {
 public:
  explicit ExternalContentProvider(std::filesystem::path root) : root_(std::move(root)) {}
  std::string kind() const override { return "external"; }

  Mat content(const AudioClip& clip) override {
    const std::string hash = clip.content_hash();
    const auto path = root_ / (hash + ".mat");
    if (!std::filesystem::exists(path)) {
      throw data_error("missing-features", "no content features for clip '" + clip.source_id + "' (" + hash + ")");
    }
    MatrixFile f = read_matrix_file(path);
    if (f.values.cols() != kContentDim) throw data_error("shape", path.string() + " is not T x 256");
    return f.values;
  }

 private:
  std::filesystem::path root_;
};

inline std::unique_ptr<ContentProvider> make_content_provider(const std::string& kind, const std::string& path = {}) {
  if (kind == "stub") return std::make_unique<StubContentProvider>();
  if (kind == "external") {
    if (path.empty()) throw config_error("content", "external content provider needs a feature directory");
    return std::make_unique<ExternalContentProvider>(path);
  }
  throw config_error("content", "unknown content provider '" + kind + "'");
}

}  // namespace melsvc::svc
