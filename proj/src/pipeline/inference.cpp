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

#include "mtevc/pipeline/inference.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>

#include "json.hpp"
#include "mtevc/autodiff/checkpoint.hpp"
#include "mtevc/autodiff/gradcheck.hpp"
#include "mtevc/dsp/waveform.hpp"
#include "mtevc/error.hpp"
#include "mtevc/models/conversion.hpp"
#include "mtevc/models/flowavenet.hpp"
#include "mtevc/models/wavenet.hpp"
#include "mtevc/pipeline/features.hpp"
#include "mtevc/rng.hpp"

namespace mtevc::pipeline {

namespace fs = std::filesystem;

namespace {

void check_generator(const std::string& generator) {
  if (generator != "griffinlim" && generator != "wavenet" &&
      generator != "flowavenet")
    throw UsageError("unknown generator '" + generator +
                     "' (expected griffinlim, wavenet, or flowavenet)");
}

void check_vocoder_ids(const std::string& generator, int speaker, int emotion,
                       int num_speakers, int num_emotions) {
  if (speaker < 0 || speaker >= num_speakers)
    throw UsageError("speaker id " + std::to_string(speaker) +
                     " outside the " + generator + " speaker table [0, " +
                     std::to_string(num_speakers) + ")");
  if (emotion < 0 || emotion >= num_emotions)
    throw UsageError("emotion id " + std::to_string(emotion) +
                     " outside the " + generator + " emotion table [0, " +
                     std::to_string(num_emotions) + ")");
}

// Renders a converted Mel matrix through the selected generator. Neural
// vocoders must be passed in already restored from their checkpoints.
dsp::Waveform generate(const RunConfig& cfg, const std::string& generator,
                       models::WaveNetModel<float>* wavenet,
                       models::FlowModel<float>* flow,
                       const Eigen::MatrixXd& mel, int speaker, int emotion,
                       int sample_rate_hz, Rng& rng) {
  if (generator == "wavenet")
    return wavenet->sample(mel, speaker, emotion, models::SampleMode::kFast,
                           rng);
  if (generator == "flowavenet") return flow->sample(mel, speaker, emotion, rng);
  dsp::MelSpectrogram ms;
  ms.values = mel;
  ms.config = cfg.features;
  return dsp::griffin_lim(
      ms, static_cast<int>(cfg.training.griffin_lim_iters), sample_rate_hz);
}

}  // namespace

void convert_utterance(const RunConfig& cfg, const ConvertRequest& req) {
  check_generator(req.generator);
  if (req.target_emotion < 0 ||
      req.target_emotion >= cfg.conversion.num_emotions)
    throw UsageError("target emotion " + std::to_string(req.target_emotion) +
                     " outside the conversion model's emotion table [0, " +
                     std::to_string(cfg.conversion.num_emotions) + ")");
  if (req.generator != "griffinlim" && req.vocoder_checkpoint.empty())
    throw UsageError("generator '" + req.generator +
                     "' needs a vocoder checkpoint");
  if (req.out_wav.empty()) throw UsageError("missing output WAV path");

  // Restore every model before touching audio so configuration mismatch
  // fails fast.
  Rng rng(cfg.seed);
  models::ConversionModel<float> conversion(cfg.conversion, rng);
  autodiff::load_checkpoint(req.conversion_checkpoint, conversion.params(),
                            conversion_fingerprint(cfg));

  std::unique_ptr<models::WaveNetModel<float>> wavenet;
  std::unique_ptr<models::FlowModel<float>> flow;
  if (req.generator == "wavenet") {
    check_vocoder_ids(req.generator, req.target_speaker, req.target_emotion,
                      cfg.wavenet.num_speakers, cfg.wavenet.num_emotions);
    wavenet =
        std::make_unique<models::WaveNetModel<float>>(cfg.wavenet, rng);
    autodiff::load_checkpoint(req.vocoder_checkpoint, wavenet->params(),
                              wavenet_fingerprint(cfg));
  } else if (req.generator == "flowavenet") {
    check_vocoder_ids(req.generator, req.target_speaker, req.target_emotion,
                      cfg.flowavenet.num_speakers,
                      cfg.flowavenet.num_emotions);
    flow = std::make_unique<models::FlowModel<float>>(cfg.flowavenet, rng);
    autodiff::load_checkpoint(req.vocoder_checkpoint, flow->params(),
                              flowavenet_fingerprint(cfg));
  }

  dsp::Waveform src = dsp::read_wav(req.source_wav);
  dsp::MelSpectrogram mel = dsp::mel_spectrogram(src, cfg.features);
  Eigen::MatrixXd input = mel.values;
  if (cfg.conversion.use_ppg) {
    if (req.source_ppg.empty())
      throw UsageError("the conversion model requires a source PPG file");
    Eigen::MatrixXd ppg =
        read_feature_file(req.source_ppg, kPpgMagic).cast<double>();
    if (ppg.cols() != cfg.conversion.ppg_dim)
      throw DataError("PPG '" + req.source_ppg + "' has width " +
                      std::to_string(ppg.cols()) + ", config expects " +
                      std::to_string(cfg.conversion.ppg_dim));
    const long diff = std::labs(ppg.rows() - mel.values.rows());
    if (diff > 2)
      throw AlignmentError("PPG has " + std::to_string(ppg.rows()) +
                           " frames for " + std::to_string(mel.values.rows()) +
                           " Mel frames");
    const long frames = std::min(ppg.rows(), mel.values.rows());
    input.resize(frames, cfg.conversion.input_dim());
    input.leftCols(cfg.conversion.mel_dim) = mel.values.topRows(frames);
    input.rightCols(cfg.conversion.ppg_dim) = ppg.topRows(frames);
  }

  Eigen::MatrixXd converted = conversion.convert(input, req.target_emotion);
  dsp::Waveform out =
      generate(cfg, req.generator, wavenet.get(), flow.get(), converted,
               req.target_speaker, req.target_emotion, src.sample_rate_hz,
               rng);
  dsp::write_wav(req.out_wav, out);
}

void synthesize_utterance(const RunConfig& cfg, const SynthesizeRequest& req) {
  check_generator(req.generator);
  if (req.generator != "griffinlim" && req.vocoder_checkpoint.empty())
    throw UsageError("generator '" + req.generator +
                     "' needs a vocoder checkpoint");
  if (req.out_wav.empty()) throw UsageError("missing output WAV path");

  Rng rng(cfg.seed);
  std::unique_ptr<models::WaveNetModel<float>> wavenet;
  std::unique_ptr<models::FlowModel<float>> flow;
  if (req.generator == "wavenet") {
    check_vocoder_ids(req.generator, req.speaker, req.emotion,
                      cfg.wavenet.num_speakers, cfg.wavenet.num_emotions);
    wavenet =
        std::make_unique<models::WaveNetModel<float>>(cfg.wavenet, rng);
    autodiff::load_checkpoint(req.vocoder_checkpoint, wavenet->params(),
                              wavenet_fingerprint(cfg));
  } else if (req.generator == "flowavenet") {
    check_vocoder_ids(req.generator, req.speaker, req.emotion,
                      cfg.flowavenet.num_speakers,
                      cfg.flowavenet.num_emotions);
    flow = std::make_unique<models::FlowModel<float>>(cfg.flowavenet, rng);
    autodiff::load_checkpoint(req.vocoder_checkpoint, flow->params(),
                              flowavenet_fingerprint(cfg));
  }

  dsp::Waveform src = dsp::read_wav(req.source_wav);
  dsp::MelSpectrogram mel = dsp::mel_spectrogram(src, cfg.features);
  dsp::Waveform out =
      generate(cfg, req.generator, wavenet.get(), flow.get(), mel.values,
               req.speaker, req.emotion, src.sample_rate_hz, rng);
  dsp::write_wav(req.out_wav, out);
}

eval::EvalReport evaluate_command(const std::string& pairs_json,
                                  const dsp::SpectrogramConfig& cfg,
                                  const std::string& out_dir) {
  std::ifstream is(pairs_json);
  if (!is) throw IoError("cannot open pair list '" + pairs_json + "'");
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw DataError("pair list '" + pairs_json + "': " + ex.what());
  }
  const fs::path base = fs::path(pairs_json).parent_path();
  auto resolve = [&base](const std::string& p) {
    if (p.empty() || fs::path(p).is_absolute()) return p;
    return (base / p).string();
  };
  std::vector<eval::EvalPair> pairs;
  try {
    for (const auto& jp : j.at("pairs")) {
      eval::EvalPair p;
      p.id = jp.at("id").get<std::string>();
      p.emotion = jp.at("emotion").get<std::string>();
      p.converted_path = resolve(jp.at("converted").get<std::string>());
      p.target_path = resolve(jp.at("target").get<std::string>());
      pairs.push_back(std::move(p));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw DataError("pair list '" + pairs_json + "': " + ex.what());
  }

  eval::EvalReport report = eval::evaluate_pairs(pairs, cfg);

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + out_dir + "'");
  {
    std::ofstream os((fs::path(out_dir) / "report.json").string());
    if (!os) throw IoError("cannot write report.json in '" + out_dir + "'");
    os << report.to_json() << "\n";
  }
  {
    std::ofstream os((fs::path(out_dir) / "report.txt").string());
    if (!os) throw IoError("cannot write report.txt in '" + out_dir + "'");
    os << report.to_table();
  }
  return report;
}

namespace {

template <class S>
void perturb(autodiff::ParamStore<S>& params, Rng& rng, double stddev) {
  for (auto& e : params.entries()) {
    if (!e.trainable) continue;
    for (auto& v : e.tensor.values())
      v += static_cast<S>(rng.normal() * stddev);
  }
}

Eigen::MatrixXd random_matrix(long rows, long cols, Rng& rng,
                              double scale = 1.0) {
  Eigen::MatrixXd m(rows, cols);
  for (long r = 0; r < rows; ++r)
    for (long c = 0; c < cols; ++c) m(r, c) = rng.normal() * scale;
  return m;
}

}  // namespace

bool run_gradcheck(std::ostream& os) {
  namespace ad = autodiff;
  const double tol = 1e-4;
  bool ok = true;
  auto record = [&](const char* what, const ad::GradCheckReport& report) {
    bool passed = report.passed(tol);
    ok = ok && passed;
    os << (passed ? "[pass] " : "[FAIL] ") << what << ": " << report.summary()
       << "\n";
  };

  {
    Rng rng(18);
    models::ConversionConfig cfg;
    cfg.mel_dim = 4;
    cfg.ppg_dim = 3;
    cfg.num_emotions = 3;
    cfg.emotion_embed_dim = 2;
    cfg.dense_units = 6;
    cfg.dense_layers = 1;
    cfg.blstm_layers = 1;
    cfg.blstm_units = 5;
    models::ConversionModel<double> model(cfg, rng);
    Eigen::MatrixXd input = random_matrix(5, cfg.input_dim(), rng, 0.7);
    Eigen::MatrixXd target = random_matrix(5, cfg.mel_dim, rng, 0.7);
    auto loss_fn = [&]() {
      return ad::l1_loss(model.forward(model.to_tensor(input), 1),
                         model.to_tensor(target));
    };
    Rng probe(19);
    record("conversion model", ad::grad_check<double>(model.params(),
                                                      loss_fn, probe));
  }
  {
    Rng rng(25);
    models::WaveNetConfig cfg;
    cfg.cycles = 1;
    cfg.dilations_per_cycle = 2;
    cfg.residual_channels = 3;
    cfg.gate_channels = 3;
    cfg.skip_channels = 3;
    cfg.classes = 5;
    cfg.mel_dim = 2;
    cfg.num_speakers = 2;
    cfg.num_emotions = 2;
    cfg.speaker_embed_dim = 2;
    cfg.emotion_embed_dim = 2;
    cfg.upsample_strides = {2, 2};
    models::WaveNetModel<double> model(cfg, rng);
    perturb(model.params(), rng, 0.2);
    Eigen::MatrixXd mel = random_matrix(3, cfg.mel_dim, rng);
    std::vector<int> ids(12), targets(12);
    for (auto& v : ids) v = static_cast<int>(rng.below(cfg.classes));
    for (auto& v : targets) v = static_cast<int>(rng.below(cfg.classes));
    auto loss_fn = [&]() {
      auto cond = model.upsample_conditions(mel);
      return ad::cross_entropy_with_logits(
          model.forward_teacher_forced(ids, cond, 1, 0), targets);
    };
    Rng probe(26);
    record("wavenet vocoder", ad::grad_check<double>(model.params(),
                                                     loss_fn, probe));
  }
  {
    Rng rng(38);
    models::FlowConfig cfg;
    cfg.blocks = 1;
    cfg.flows_per_block = 1;
    cfg.coupling_channels = 3;
    cfg.coupling_stacks = 1;
    cfg.dilations_per_stack = 2;
    cfg.mel_dim = 2;
    cfg.upsample_strides = {2, 2};
    models::FlowModel<double> model(cfg, rng);
    perturb(model.params(), rng, 0.2);
    Eigen::MatrixXd mel = random_matrix(2, cfg.mel_dim, rng);
    ad::SVec<double> xv(8);
    for (auto& v : xv) v = rng.normal();
    auto x = ad::Tensor<double>::from_values({1, 8}, std::move(xv));
    auto loss_fn = [&]() {
      auto cond = model.upsample_conditions(mel);
      return model.loss(model.forward(x, cond, 0, 1), 8);
    };
    Rng probe(39);
    record("flowavenet vocoder", ad::grad_check<double>(model.params(),
                                                        loss_fn, probe));
  }
  return ok;
}

}  // namespace mtevc::pipeline
