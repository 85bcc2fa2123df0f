// Copyright 2026 The mtevc Authors
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

#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "mtevc/error.hpp"
#include "mtevc/pipeline/config.hpp"
#include "mtevc/pipeline/features.hpp"
#include "mtevc/pipeline/inference.hpp"
#include "mtevc/pipeline/manifest.hpp"
#include "mtevc/pipeline/synth.hpp"
#include "mtevc/pipeline/training.hpp"

namespace pl = mtevc::pipeline;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitDiverged = 3;

struct CommonOpts {
  std::string config_path;
  bool seed_set = false;
  uint64_t seed = 0;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path,
                  "JSON run configuration (defaults when omitted)");
  cmd->add_option("--seed", opts.seed, "Override the configured RNG seed")
      ->each([&opts](const std::string&) { opts.seed_set = true; });
}

pl::RunConfig resolve_config(const CommonOpts& opts) {
  pl::RunConfig cfg;
  if (!opts.config_path.empty())
    cfg = pl::load_run_config(opts.config_path);
  if (opts.seed_set) cfg.seed = opts.seed;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-target emotional voice conversion toolkit"};
  app.require_subcommand(1);

  // synth-dataset
  auto* synth = app.add_subcommand(
      "synth-dataset", "Generate a parallel synthetic corpus with manifest");
  CommonOpts synth_common;
  add_common(synth, synth_common);
  pl::SyntheticCorpusSpec spec;
  std::string synth_out;
  synth->add_option("--out", synth_out, "Corpus output directory")
      ->required();
  synth->add_option("--speakers", spec.num_speakers, "Number of speakers");
  synth->add_option("--emotions", spec.num_emotions, "Number of emotions");
  synth->add_option("--utterances", spec.utterances_per_cell,
                    "Utterances per (speaker, emotion) cell");

  // prepare
  auto* prepare = app.add_subcommand(
      "prepare", "Extract and cache Mel features for a manifest");
  CommonOpts prepare_common;
  add_common(prepare, prepare_common);
  std::string prepare_manifest, prepare_cache;
  bool prepare_strict = false;
  prepare->add_option("--manifest", prepare_manifest, "Manifest JSON")
      ->required();
  prepare->add_option("--cache", prepare_cache, "Feature cache directory")
      ->required();
  prepare->add_flag("--strict", prepare_strict,
                    "Fail when any entry cannot be prepared");

  // train-conversion
  auto* trainc = app.add_subcommand(
      "train-conversion", "Train the multi-target Mel conversion model");
  CommonOpts trainc_common;
  add_common(trainc, trainc_common);
  std::string trainc_manifest, trainc_cache, trainc_out;
  int trainc_source = 0;
  bool trainc_baseline = false;
  trainc->add_option("--manifest", trainc_manifest, "Manifest JSON")
      ->required();
  trainc->add_option("--cache", trainc_cache, "Feature cache directory")
      ->required();
  trainc->add_option("--out", trainc_out, "Checkpoint output directory")
      ->required();
  trainc->add_option("--source-emotion", trainc_source,
                     "Source emotion id to convert from");
  trainc->add_flag("--baseline", trainc_baseline,
                   "Train the Mel-only variant without PPG inputs");

  // train-vocoder
  auto* trainv = app.add_subcommand(
      "train-vocoder", "Train a neural vocoder on the whole corpus");
  CommonOpts trainv_common;
  add_common(trainv, trainv_common);
  std::string trainv_manifest, trainv_cache, trainv_out, trainv_kind;
  trainv->add_option("--manifest", trainv_manifest, "Manifest JSON")
      ->required();
  trainv->add_option("--cache", trainv_cache, "Feature cache directory")
      ->required();
  trainv->add_option("--out", trainv_out, "Checkpoint output directory")
      ->required();
  trainv->add_option("--kind", trainv_kind, "wavenet or flowavenet")
      ->required();

  // convert
  auto* convert = app.add_subcommand(
      "convert", "Convert one utterance to a target emotion");
  CommonOpts convert_common;
  add_common(convert, convert_common);
  pl::ConvertRequest creq;
  convert->add_option("--input", creq.source_wav, "Source WAV")->required();
  convert->add_option("--ppg", creq.source_ppg, "Source PPG (PPGF file)");
  convert->add_option("--emotion", creq.target_emotion, "Target emotion id")
      ->required();
  convert
      ->add_option("--speaker", creq.target_speaker,
                   "Speaker id for vocoder conditioning")
      ->required();
  convert
      ->add_option("--conversion-checkpoint", creq.conversion_checkpoint,
                   "Trained conversion model")
      ->required();
  convert->add_option("--generator", creq.generator,
                      "griffinlim, wavenet, or flowavenet");
  convert->add_option("--vocoder-checkpoint", creq.vocoder_checkpoint,
                      "Trained vocoder (neural generators only)");
  convert->add_option("--output", creq.out_wav, "Output WAV")->required();

  // synthesize
  auto* synthz = app.add_subcommand(
      "synthesize", "Vocoder copy-synthesis of one utterance");
  CommonOpts synthz_common;
  add_common(synthz, synthz_common);
  pl::SynthesizeRequest sreq;
  synthz->add_option("--input", sreq.source_wav, "Source WAV")->required();
  synthz->add_option("--speaker", sreq.speaker, "Speaker id")->required();
  synthz->add_option("--emotion", sreq.emotion, "Emotion id")->required();
  synthz->add_option("--generator", sreq.generator,
                     "griffinlim, wavenet, or flowavenet");
  synthz->add_option("--vocoder-checkpoint", sreq.vocoder_checkpoint,
                     "Trained vocoder (neural generators only)");
  synthz->add_option("--output", sreq.out_wav, "Output WAV")->required();

  // evaluate
  auto* evaluate = app.add_subcommand(
      "evaluate", "Score converted/target pairs and write a report");
  CommonOpts eval_common;
  add_common(evaluate, eval_common);
  std::string eval_pairs, eval_out;
  bool eval_strict = false;
  evaluate->add_option("--pairs", eval_pairs, "JSON pair list")->required();
  evaluate->add_option("--out", eval_out, "Report output directory")
      ->required();
  evaluate->add_flag("--strict", eval_strict,
                     "Fail when any referenced file is missing");

  // gradcheck
  auto* gradcheck = app.add_subcommand(
      "gradcheck", "Verify model gradients against finite differences");
  CommonOpts grad_common;
  add_common(gradcheck, grad_common);

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      pl::RunConfig cfg = resolve_config(synth_common);
      pl::Manifest m = pl::synth_dataset(spec, synth_out, cfg.seed);
      std::printf("wrote %zu utterances to %s\n", m.entries.size(),
                  synth_out.c_str());
    } else if (prepare->parsed()) {
      pl::RunConfig cfg = resolve_config(prepare_common);
      pl::Manifest m = pl::load_manifest(prepare_manifest);
      pl::PrepareReport report = pl::prepare_features(
          m, prepare_cache, cfg.features, pl::features_fingerprint(cfg));
      std::printf("prepared %ld, cache hits %ld, failed %zu\n",
                  report.computed, report.cached, report.failed.size());
      for (const auto& f : report.failed)
        std::fprintf(stderr, "failed: %s\n", f.c_str());
      if (prepare_strict && !report.failed.empty()) return kExitData;
    } else if (trainc->parsed()) {
      pl::RunConfig cfg = resolve_config(trainc_common);
      if (trainc_baseline) cfg.conversion.use_ppg = false;
      pl::Manifest m = pl::load_manifest(trainc_manifest);
      pl::TrainResult r = pl::train_conversion(m, trainc_cache, cfg,
                                               trainc_source, trainc_out);
      std::printf("saved %s after %ld steps\n", r.checkpoint_path.c_str(),
                  r.steps);
    } else if (trainv->parsed()) {
      pl::RunConfig cfg = resolve_config(trainv_common);
      pl::Manifest m = pl::load_manifest(trainv_manifest);
      pl::TrainResult r = pl::train_vocoder(m, trainv_cache, cfg, trainv_kind,
                                            trainv_out);
      std::printf("saved %s after %ld steps\n", r.checkpoint_path.c_str(),
                  r.steps);
    } else if (convert->parsed()) {
      pl::RunConfig cfg = resolve_config(convert_common);
      pl::convert_utterance(cfg, creq);
      std::printf("wrote %s\n", creq.out_wav.c_str());
    } else if (synthz->parsed()) {
      pl::RunConfig cfg = resolve_config(synthz_common);
      pl::synthesize_utterance(cfg, sreq);
      std::printf("wrote %s\n", sreq.out_wav.c_str());
    } else if (evaluate->parsed()) {
      pl::RunConfig cfg = resolve_config(eval_common);
      mtevc::eval::EvalReport report =
          pl::evaluate_command(eval_pairs, cfg.features, eval_out);
      std::fputs(report.to_table().c_str(), stdout);
      if (eval_strict && !report.missing.empty()) return kExitData;
    } else if (gradcheck->parsed()) {
      if (!pl::run_gradcheck(std::cout)) return kExitDiverged;
    }
  } catch (const mtevc::UsageError& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return kExitUsage;
  } catch (const mtevc::TrainingDiverged& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return kExitDiverged;
  } catch (const mtevc::SingularityError& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return kExitDiverged;
  } catch (const mtevc::Error& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return kExitData;
  }
  return kExitOk;
}
