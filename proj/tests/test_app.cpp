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

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "melsvc/app/pipeline.hpp"
#include "test_support.hpp"

using namespace melsvc;
using app::ExperimentConfig;
namespace fs = std::filesystem;

namespace {

// Tiny models and step counts; the corpus layout matches make-toy-corpus.
const char* kTinyYaml = R"(
version: melsvc-config/1
seed: 7
melody:
  steps: 12
  batch_size: 2
  crop_seconds: 0.4
  lr: 1.0e-3
  freeze_step: 6
  log_every: 4
  fft: {num_blocks: 1, model_dim: 32, attention_heads: 2, conv_kernel: 3, filter_dim: 32, dropout: 0.0}
svc:
  steps: 6
  in_batch: 2
  out_batch: 1
  crop_frames: 40
  encoder: {num_blocks: 1, model_dim: 32, attention_heads: 2, conv_kernel: 3, filter_dim: 32, dropout: 0.0}
  decoder: {num_blocks: 1, model_dim: 32, attention_heads: 2, conv_kernel: 3, filter_dim: 32, dropout: 0.0}
  disc_channels: 8
  disc_layers: 2
)";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

ExperimentConfig tiny() { return ExperimentConfig::from_yaml_text(kTinyYaml, false); }

}  // namespace

TEST(Config, DefaultsValidate) {
  const auto c = ExperimentConfig::from_yaml_text("", false);
  EXPECT_EQ(c.json(), app::default_config());
  EXPECT_EQ(c.condition_name(), "proposed");
  EXPECT_EQ(c.backbone().kind, "stub");
}

TEST(Config, UnknownKeysAreRejected) {
  for (const char* text : {"version: melsvc-config/1\nbogus: 1\n", "melody: {stepz: 3}\n",
                           "melody: {fft: {num_blockz: 2}}\n", "backbone: {stub: {layers: 2}}\n"}) {
    try {
      ExperimentConfig::from_yaml_text(text, false);
      ADD_FAILURE() << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), "unknown-key") << text;
      EXPECT_EQ(e.kind(), ErrorKind::config);
    }
  }
}

TEST(Config, TypeAndGridViolationsAreConfigErrors) {
  for (const char* text : {"melody: {steps: many}\n", "melody: [1, 2]\n", "dsp: {hop_ms: 12.5}\n",
                           "version: melsvc-config/9\n", "condition: best\n", "svc: {vocoder: wavenet}\n",
                           "workers: 0\n", "data: {speed_rates: [fast]}\n", "melody: {steps: [1]\n"}) {
    try {
      ExperimentConfig::from_yaml_text(text, false);
      ADD_FAILURE() << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::config) << text;
      EXPECT_EQ(app::exit_code(e), 2);
    }
  }
}

TEST(Config, EnvironmentOverridesOnlyPathKeys) {
  ::setenv("MELSVC_DATA_CORPUS", "/from/env", 1);
  ::setenv("MELSVC_MELODY_STEPS", "3", 1);
  const auto c = ExperimentConfig::from_yaml_text("data: {corpus: /from/file}\n");
  ::unsetenv("MELSVC_DATA_CORPUS");
  ::unsetenv("MELSVC_MELODY_STEPS");
  EXPECT_EQ(c.path("data", "corpus"), "/from/env");
  EXPECT_EQ(c.json()["melody"]["steps"], 10000);
  EXPECT_EQ(app::env_name("svc", "vocoder_command"), "MELSVC_SVC_VOCODER_COMMAND");
}

TEST(Config, ArchivedConfigReloadsIdentically) {
  test::TempDir dir;
  auto c = tiny();
  c.set_seed(123);
  c.set_condition("raw-single");
  c.json()["data"]["speed_rates"] = {0.9, 1.1};
  c.archive(dir.path());
  const auto back = ExperimentConfig::load(dir / app::kResolvedConfigName, false);
  EXPECT_EQ(back.json(), c.json());
  EXPECT_EQ(back.to_yaml(), c.to_yaml());
  EXPECT_EQ(back.melody_model().fft.model_dim, 32);
  EXPECT_EQ(back.speed_rates(), (std::vector<double>{0.9, 1.1}));
}

TEST(Config, ShippedToyConfigLoads) {
  const auto c = ExperimentConfig::load(fs::path(MELSVC_SOURCE_DIR) / "configs" / "toy.yaml", false);
  EXPECT_TRUE(c.melody_training().cosine_decay);
  EXPECT_EQ(c.svc_model().encoder.model_dim, 64);
}

class Pipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = new test::TempDir();
    const auto cfg = tiny();
    app::make_toy_corpus(root_->path() / "corpus", 40, 3, 0.5, 5);
    auto c = cfg;
    c.set_path("data", "corpus", (root_->path() / "corpus" / "stems").string());
    stems_ = app::prepare_data(c, root_->path() / "stems.jsonl");
    c.json()["data"]["layout"] = "clean";
    c.json()["data"]["role"] = "in_set";
    c.set_path("data", "corpus", (root_->path() / "corpus" / "target").string());
    auto in = app::prepare_data(c, root_->path() / "in.jsonl");
    c.json()["data"]["role"] = "out_set";
    c.set_path("data", "corpus", (root_->path() / "corpus" / "others").string());
    auto out = app::prepare_data(c, root_->path() / "out.jsonl");
    svc_entries_ = in;
    svc_entries_.insert(svc_entries_.end(), out.begin(), out.end());
    app::train_melody_stage(cfg, app::melody_data(cfg, stems_), root_->path() / "melody");
    app::train_svc_stage(cfg, svc_entries_, root_->path() / "melody" / "melody.ckpt", root_->path() / "svc");
  }
  static void TearDownTestSuite() {
    delete root_;
    root_ = nullptr;
  }
  static fs::path p(const std::string& s) { return root_->path() / s; }
  static fs::path source() { return svc_entries_.back().vocal_path; }

  static inline test::TempDir* root_ = nullptr;
  static inline std::vector<ManifestEntry> stems_, svc_entries_;
};

TEST_F(Pipeline, StagesWriteTheirArtifacts) {
  for (const char* f : {"melody/melody.ckpt", "melody/layer_weights.csv", "melody/config.resolved.yaml",
                        "svc/svc.ckpt", "svc/config.resolved.yaml", "stems.jsonl"})
    EXPECT_TRUE(fs::exists(p(f))) << f;
  // Header plus one row per logged step, each row a distribution over layers.
  std::istringstream csv(slurp(p("melody/layer_weights.csv")));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line.rfind("step,w_0", 0), 0u);
  int rows = 0;
  while (std::getline(csv, line)) {
    double sum = 0.0;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    while (std::getline(ss, cell, ',')) sum += std::stod(cell);
    EXPECT_NEAR(sum, 1.0, 1e-6);
    ++rows;
  }
  EXPECT_GE(rows, 3);
}

TEST_F(Pipeline, EndToEndIsDeterministic) {
  const auto cfg = tiny();
  const auto a = app::end_to_end(cfg, source(), p("svc/svc.ckpt"), p("melody/melody.ckpt"), p("e2e/a.wav"), source());
  const auto b = app::end_to_end(cfg, source(), p("svc/svc.ckpt"), p("melody/melody.ckpt"), p("e2e/b.wav"), source());
  EXPECT_EQ(a.output_hash, b.output_hash);
  EXPECT_EQ(slurp(a.output), slurp(b.output));
  EXPECT_TRUE(a.f0rmse.has_value());
  const auto side = nlohmann::json::parse(slurp(p("e2e/a.wav.json")));
  EXPECT_EQ(side["output_hash"], a.output_hash);
  EXPECT_TRUE(fs::exists(p("e2e/config.resolved.yaml")));
  const auto out = ingest(a.output);
  const auto src = ingest(source());
  EXPECT_LE(std::abs(static_cast<long>(out.samples.size()) - static_cast<long>(src.samples.size())), 800);
}

TEST_F(Pipeline, MissingMelodyCheckpointNamesTheStage) {
  const auto cfg = tiny();
  try {
    app::end_to_end(cfg, source(), p("svc/svc.ckpt"), p("nowhere/melody.ckpt"), p("e2e/x.wav"));
    FAIL();
  } catch (const StageFailure& e) {
    EXPECT_EQ(e.stage(), "melody-extractor");
    EXPECT_EQ(app::exit_code(e), 4);
  }
  try {
    app::end_to_end(cfg, source(), p("svc/svc.ckpt"), std::nullopt, p("e2e/x.wav"));
    FAIL();
  } catch (const StageFailure& e) {
    EXPECT_EQ(e.stage(), "melody-extractor");
  }
  EXPECT_FALSE(fs::exists(p("e2e/x.wav")));
}

TEST_F(Pipeline, MissingSourceAndCheckpointNameTheirStages) {
  const auto cfg = tiny();
  try {
    app::end_to_end(cfg, p("nothing.wav"), p("svc/svc.ckpt"), p("melody/melody.ckpt"), p("e2e/x.wav"));
    FAIL();
  } catch (const StageFailure& e) {
    EXPECT_EQ(e.stage(), "data-manifest");
  }
  try {
    app::end_to_end(cfg, source(), p("nothing.ckpt"), p("melody/melody.ckpt"), p("e2e/x.wav"));
    FAIL();
  } catch (const StageFailure& e) {
    EXPECT_EQ(e.stage(), "svc-core");
  }
}

TEST_F(Pipeline, GtaExportCoversInSetOnly) {
  const auto cfg = tiny();
  auto sys = app::load_svc_system(cfg, p("svc/svc.ckpt"), p("melody/melody.ckpt"));
  const auto rep = vocoder::gta_export(svc_entries_, *sys.generator, sys.melody->model.get(), *sys.content, p("gta"),
                                       sys.melody_sig);
  EXPECT_EQ(rep.pairs.size(), 3u);
  EXPECT_TRUE(rep.skipped.empty());
}

TEST_F(Pipeline, AblationTableIsByteIdenticalAcrossRuns) {
  auto cfg = tiny();
  cfg.json()["melody"]["steps"] = 4;
  const auto rows = app::run_ablation_matrix(cfg, stems_, p("ab1"));
  app::run_ablation_matrix(cfg, stems_, p("ab2"));
  ASSERT_EQ(rows.size(), 7u);
  for (const auto& r : rows) EXPECT_TRUE(r.ok) << r.condition.name << ": " << r.error;
  EXPECT_EQ(slurp(p("ab1/ablation.md")), slurp(p("ab2/ablation.md")));
  EXPECT_EQ(slurp(p("ab1/ablation.json")), slurp(p("ab2/ablation.json")));
  EXPECT_TRUE(fs::exists(p("ab1/proposed/report.json")));
}

TEST(PipelineErrors, AblationNeedsATestSplit) {
  test::TempDir dir;
  auto cfg = tiny();
  app::make_toy_corpus(dir / "c", 6, 1, 0.3, 1);
  cfg.set_path("data", "corpus", (dir / "c" / "stems").string());
  const auto entries = app::prepare_data(cfg, dir / "m.jsonl");
  try {
    app::run_ablation_matrix(cfg, entries, dir / "ab");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "composition");
    EXPECT_EQ(app::exit_code(e), 3);
  }
}
