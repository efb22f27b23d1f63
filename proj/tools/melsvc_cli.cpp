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

// melsvc: one entry point for data preparation, training, conversion,
// synthesis, evaluation and the ablation matrix.
// Exit codes: 0 success, 2 config error, 3 data error, 4 stage failure.

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "melsvc/app/pipeline.hpp"

using namespace melsvc;
namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "YAML experiment config");
  cmd->add_option("--seed", c.seed, "Random seed (overrides config)");
  cmd->add_option("--workers", c.workers, "Worker threads (overrides config)");
}

app::ExperimentConfig resolve(const Common& c) {
  auto cfg = c.config.empty() ? app::ExperimentConfig::from_yaml_text("") : app::ExperimentConfig::load(c.config);
  if (c.seed) cfg.set_seed(*c.seed);
  if (c.workers) cfg.set_workers(*c.workers);
  cfg.validate();
  return cfg;
}

std::optional<fs::path> opt_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return fs::path(s);
}

std::vector<ManifestEntry> manifests_or_config(const std::vector<std::string>& flags, const app::ExperimentConfig& cfg) {
  if (!flags.empty()) return app::concat_manifests(flags);
  const std::string m = cfg.path("data", "manifest");
  if (m.empty()) throw config_error("config", "no manifest given (--manifest or data.manifest)");
  return read_manifest(m);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"melsvc: accompaniment-robust melody extraction and singing voice conversion"};
  cli.require_subcommand(1);
  Common common;
  std::function<void()> action;

  // make-toy-corpus
  {
    auto* c = cli.add_subcommand("make-toy-corpus", "Write a synthetic stems + clean-vocal corpus");
    static std::string out;
    static std::size_t songs = 24, takes = 6;
    static double seconds = 1.0;
    c->add_option("--out", out, "Output directory")->required();
    c->add_option("--songs", songs, "Stem songs");
    c->add_option("--takes", takes, "Takes per clean singer");
    c->add_option("--seconds", seconds, "Clip length");
    add_common(c, common);
    c->callback([&] {
      action = [&] {
        const auto cfg = resolve(common);
        app::make_toy_corpus(out, songs, takes, seconds, cfg.seed());
        cfg.archive(out);
      };
    });
  }

  // prepare-data
  {
    auto* c = cli.add_subcommand("prepare-data", "Scan a corpus into a manifest");
    static std::string corpus, layout, role, out;
    c->add_option("--corpus", corpus, "Corpus root");
    c->add_option("--layout", layout, "stems|clean");
    c->add_option("--role", role, "in_set|out_set|extractor_corpus");
    c->add_option("--out", out, "Manifest path (.jsonl)")->required();
    add_common(c, common);
    c->callback([&] {
      action = [&] {
        auto cfg = resolve(common);
        if (!corpus.empty()) cfg.set_path("data", "corpus", corpus);
        if (!layout.empty()) cfg.json()["data"]["layout"] = layout;
        if (!role.empty()) cfg.json()["data"]["role"] = role;
        cfg.validate();
        const auto entries = app::prepare_data(cfg, out);
        std::cout << entries.size() << " entries -> " << out << "\n";
      };
    });
  }

  // mix / perturb
  {
    auto* c = cli.add_subcommand("mix", "Mix a vocal with BGM at a target SNR");
    static std::string vocal, bgm, out;
    static double snr = 5.0;
    c->add_option("--vocal", vocal)->required();
    c->add_option("--bgm", bgm)->required();
    c->add_option("--snr", snr, "Target SNR in dB");
    c->add_option("--out", out)->required();
    c->callback([&] {
      action = [&] { write_clip(out, dsp::mix_at_snr(ingest(vocal), ingest(bgm), snr)); };
    });
    auto* p = cli.add_subcommand("perturb", "Resample playback speed");
    static std::string in, pout;
    static double rate = 1.0;
    p->add_option("--in", in)->required();
    p->add_option("--rate", rate, "Speed factor")->required();
    p->add_option("--out", pout)->required();
    p->callback([&] {
      action = [&] { write_clip(pout, dsp::speed_perturb(ingest(in), rate)); };
    });
  }

  // label
  {
    auto* c = cli.add_subcommand("label", "Pitch-label every manifest entry into a cache");
    static std::vector<std::string> manifests;
    static std::string out;
    c->add_option("--manifest", manifests, "Manifest(s)");
    c->add_option("--out", out, "Label directory")->required();
    add_common(c, common);
    c->callback([&] {
      action = [&] {
        const auto cfg = resolve(common);
        const auto set = app::label_stage(cfg, manifests_or_config(manifests, cfg), out);
        std::cout << set.labels.size() << " labelled, " << set.failures.size() << " failed\n";
      };
    });
  }

  // train-melody
  {
    auto* c = cli.add_subcommand("train-melody", "Train the melody extractor");
    static std::vector<std::string> manifests;
    static std::string condition, backbone, labels, out;
    c->add_option("--manifest", manifests, "Manifest(s)");
    c->add_option("--condition", condition, "Ablation condition");
    c->add_option("--backbone", backbone, "stub|hubert|wavlm");
    c->add_option("--labels", labels, "Label cache directory");
    c->add_option("--out", out, "Output directory")->required();
    add_common(c, common);
    c->callback([&] {
      action = [&] {
        auto cfg = resolve(common);
        if (!condition.empty()) cfg.set_condition(condition);
        if (!backbone.empty()) cfg.json()["backbone"]["kind"] = backbone;
        if (!labels.empty()) cfg.set_path("data", "labels", labels);
        const auto data = app::melody_data(cfg, manifests_or_config(manifests, cfg));
        const auto run = app::train_melody_stage(cfg, data, out);
        std::cout << "melody checkpoint -> " << run.checkpoint.string() << "\n";
      };
    });
  }

  // train-svc
  {
    auto* c = cli.add_subcommand("train-svc", "Train the any-to-one converter");
    static std::vector<std::string> manifests;
    static std::string melody_ckpt, content, out;
    c->add_option("--manifest", manifests, "Manifest(s) with in_set and out_set entries");
    c->add_option("--melody-ckpt", melody_ckpt, "Melody extractor checkpoint");
    c->add_option("--content", content, "stub|external");
    c->add_option("--out", out, "Output directory")->required();
    add_common(c, common);
    c->callback([&] {
      action = [&] {
        auto cfg = resolve(common);
        if (!content.empty()) cfg.json()["svc"]["content"] = content;
        cfg.validate();
        const auto run = app::train_svc_stage(cfg, manifests_or_config(manifests, cfg), opt_path(melody_ckpt), out);
        std::cout << "svc checkpoint -> " << run.checkpoint.string() << "\n";
      };
    });
  }

  // convert
  {
    auto* c = cli.add_subcommand("convert", "Convert a waveform to a target-singer mel matrix");
    static std::string in, svc_ckpt, melody_ckpt, out;
    c->add_option("--in", in)->required();
    c->add_option("--svc-ckpt", svc_ckpt)->required();
    c->add_option("--melody-ckpt", melody_ckpt);
    c->add_option("--out", out, "Mel matrix file")->required();
    add_common(c, common);
    c->callback([&] {
      action = [&] {
        const auto cfg = resolve(common);
        auto sys = app::load_svc_system(cfg, svc_ckpt, opt_path(melody_ckpt));
        const AudioClip src = ingest(in);
        write_matrix_file(out, app::convert_stage(sys, src).frames, src.content_hash());
        cfg.archive(app::output_dir_of(out));
      };
    });
  }

  // synthesize
  {
    auto* c = cli.add_subcommand("synthesize", "Render a mel matrix to a waveform");
    static std::string mel, voc, out;
    c->add_option("--mel", mel)->required();
    c->add_option("--vocoder", voc, "fallback|external");
    c->add_option("--out", out)->required();
    add_common(c, common);
    c->callback([&] {
      action = [&] {
        auto cfg = resolve(common);
        if (!voc.empty()) cfg.json()["svc"]["vocoder"] = voc;
        cfg.validate();
        dsp::MelSpectrogram m;
        m.frames = read_matrix_file(mel).values;
        write_clip(out, app::synthesize_stage(m, cfg.vocoder()));
        cfg.archive(app::output_dir_of(out));
      };
    });
  }

  // gta-export
  {
    auto* c = cli.add_subcommand("gta-export", "Export (reconstructed mel, waveform) pairs for vocoder fine-tuning");
    static std::vector<std::string> manifests;
    static std::string svc_ckpt, melody_ckpt, out;
    c->add_option("--manifest", manifests);
    c->add_option("--svc-ckpt", svc_ckpt)->required();
    c->add_option("--melody-ckpt", melody_ckpt);
    c->add_option("--out", out)->required();
    add_common(c, common);
    c->callback([&] {
      action = [&] {
        const auto cfg = resolve(common);
        auto sys = app::load_svc_system(cfg, svc_ckpt, opt_path(melody_ckpt));
        const auto rep = vocoder::gta_export(manifests_or_config(manifests, cfg), *sys.generator,
                                             sys.melody ? sys.melody->model.get() : nullptr, *sys.content, out,
                                             sys.melody_sig);
        cfg.archive(out);
        std::cout << rep.pairs.size() << " pairs, " << rep.skipped.size() << " skipped\n";
      };
    });
  }

  // make-testset
  {
    auto* c = cli.add_subcommand("make-testset", "Mix test-split vocals with test-split BGM at 0/5/10/15 dB");
    static std::vector<std::string> manifests;
    static std::string out;
    c->add_option("--manifest", manifests);
    c->add_option("--out", out, "Output directory")->required();
    add_common(c, common);
    c->callback([&] {
      action = [&] {
        const auto cfg = resolve(common);
        eval::write_testset(out, app::testset_stage(cfg, manifests_or_config(manifests, cfg)));
        cfg.archive(out);
      };
    });
  }

  // evaluate
  {
    auto* c = cli.add_subcommand("evaluate", "Score a system on a noisy test set");
    static std::string testset, system, melody_ckpt, out;
    c->add_option("--testset", testset, "testset.jsonl");
    c->add_option("--system", system,
                  "identity | <dir with svc.ckpt [melody.ckpt]> | <command run as: cmd --in x.wav --out y.wav>")
        ->required();
    c->add_option("--out", out, "report.json")->required();
    add_common(c, common);
    c->callback([&] {
      action = [&] {
        auto cfg = resolve(common);
        if (!testset.empty()) cfg.set_path("eval", "testset", testset);
        const std::string ts = cfg.path("eval", "testset");
        if (ts.empty()) throw config_error("config", "no test set given (--testset or eval.testset)");
        const auto set = eval::read_testset(ts);
        eval::ConversionFn fn;
        std::optional<app::SvcSystem> sys;
        const auto scratch = app::output_dir_of(out) / "converted";
        if (system == "identity") {
          fn = [](const eval::NoisyItem& it) { return it.clean; };
        } else if (fs::is_directory(system)) {
          const auto m = fs::path(system) / "melody.ckpt";
          sys = app::load_svc_system(cfg, fs::path(system) / "svc.ckpt", fs::exists(m) ? std::optional(m) : std::nullopt);
          const auto voc = cfg.vocoder();
          fn = [&, voc](const eval::NoisyItem& it) { return app::synthesize_stage(app::convert_stage(*sys, it.mixture), voc); };
        } else {
          fs::create_directories(scratch);
          fn = [&](const eval::NoisyItem& it) {
            const auto key = it.mixture.content_hash();
            const auto in = scratch / (key + ".in.wav"), o = scratch / (key + ".out.wav");
            write_clip(in, it.mixture);
            const std::string cmd = system + " --in '" + in.string() + "' --out '" + o.string() + "'";
            if (std::system(cmd.c_str()) != 0) throw stage_error("system", "system command failed for " + it.id);
            return ingest(o);
          };
        }
        const unsigned workers = sys ? 1u : cfg.workers();
        const auto rep = eval::evaluate(fn, set, pitch::default_labeler(), workers, cfg.json()["eval"]["log_f0"]);
        app::write_json(out, eval::to_json(rep, app::provenance(cfg)));
        cfg.archive(app::output_dir_of(out));
        const auto& o = rep.overall;
        std::cout << "f0rmse " << app::format_metric(o.n_rmse ? std::optional(o.f0rmse) : std::nullopt) << " f0corr "
                  << app::format_metric(o.n_corr ? std::optional(o.f0corr) : std::nullopt)
                  << "\n";
      };
    });
  }

  // report-weights
  {
    auto* c = cli.add_subcommand("report-weights", "Layer-weight contribution table and bar chart");
    static std::vector<std::string> ckpts;
    static std::string out;
    c->add_option("--ckpt", ckpts, "Melody checkpoint(s); several overlay in one chart")->required();
    c->add_option("--out", out, "weights.csv (an .svg is written beside it)")->required();
    add_common(c, common);
    c->callback([&] {
      action = [&] {
        const auto cfg = resolve(common);
        std::vector<std::pair<std::string, std::vector<melody::WeightLog>>> runs;
        for (const auto& p : ckpts) {
          const auto ck = nn::load_checkpoint(p);
          const std::string cond = ck.metadata.contains("condition") ? ck.metadata["condition"].value("name", p) : p;
          runs.emplace_back(cond, melody::weight_history(ck.metadata));
        }
        eval::write_layer_weight_report(out, eval::layer_weight_table(runs));
        cfg.archive(app::output_dir_of(out));
      };
    });
  }

  // ablate
  {
    auto* c = cli.add_subcommand("ablate", "Train and score all seven melody-input conditions");
    static std::vector<std::string> manifests;
    static std::string out;
    c->add_option("--manifest", manifests);
    c->add_option("--out", out, "Output directory")->required();
    add_common(c, common);
    c->callback([&] {
      action = [&] {
        const auto cfg = resolve(common);
        const auto rows = app::run_ablation_matrix(cfg, manifests_or_config(manifests, cfg), out);
        std::cout << app::ablation_table(rows);
      };
    });
  }

  // end-to-end
  {
    auto* c = cli.add_subcommand("end-to-end", "Convert and synthesize one waveform, optionally scoring it");
    static std::string in, svc_ckpt, melody_ckpt, reference, out;
    c->add_option("--in", in)->required();
    c->add_option("--svc-ckpt", svc_ckpt)->required();
    c->add_option("--melody-ckpt", melody_ckpt);
    c->add_option("--reference", reference, "Clean reference for f0 metrics");
    c->add_option("--out", out)->required();
    add_common(c, common);
    c->callback([&] {
      action = [&] {
        const auto cfg = resolve(common);
        const auto r = app::end_to_end(cfg, in, svc_ckpt, opt_path(melody_ckpt), out, opt_path(reference));
        std::cout << r.output.string() << " " << r.output_hash << "\n";
      };
    });
  }

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = cli.exit(e);
    return rc == 0 ? 0 : 2;
  }
  try {
    action();
  } catch (const StageFailure& e) {
    std::cerr << "error [stage " << e.stage() << "]: " << e.what() << "\n";
    return 4;
  } catch (const Error& e) {
    std::cerr << "error [" << e.code() << "]: " << e.what() << "\n";
    return app::exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
