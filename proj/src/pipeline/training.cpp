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

#include "mtevc/pipeline/training.hpp"

#include <cmath>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <map>

#include "mtevc/autodiff/checkpoint.hpp"
#include "mtevc/dsp/mulaw.hpp"
#include "mtevc/dsp/waveform.hpp"
#include "mtevc/error.hpp"
#include "mtevc/pipeline/features.hpp"
#include "mtevc/rng.hpp"

namespace mtevc::pipeline {

namespace fs = std::filesystem;

namespace {

// Cadence checkpoints, oldest deleted once more than `keep` exist.
class CheckpointRotation {
public:
  explicit CheckpointRotation(int keep) : keep_(keep) {}
  void add(const std::string& path) {
    kept_.push_back(path);
    while (static_cast<int>(kept_.size()) > keep_) {
      std::error_code ec;
      fs::remove(kept_.front(), ec);
      kept_.pop_front();
    }
  }

private:
  std::deque<std::string> kept_;
  int keep_;
};

std::string step_path(const std::string& out_dir, const std::string& stem,
                      long step) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "_step%06ld.ckpt", step);
  return (fs::path(out_dir) / (stem + buf)).string();
}

// Per-dimension population statistics over a set of matrices.
void matrix_stats(const std::vector<const Eigen::MatrixXd*>& mats,
                  std::vector<float>& mean, std::vector<float>& stddev) {
  const long dims = mats.front()->cols();
  std::vector<double> sum(dims, 0.0), sq(dims, 0.0);
  long frames = 0;
  for (const auto* m : mats) {
    for (long r = 0; r < m->rows(); ++r)
      for (long c = 0; c < dims; ++c) {
        double v = (*m)(r, c);
        sum[c] += v;
        sq[c] += v * v;
      }
    frames += m->rows();
  }
  mean.resize(dims);
  stddev.resize(dims);
  for (long c = 0; c < dims; ++c) {
    double mu = sum[c] / frames;
    double var = sq[c] / frames - mu * mu;
    mean[c] = static_cast<float>(mu);
    stddev[c] =
        static_cast<float>(std::max(std::sqrt(std::max(var, 0.0)), 1e-6));
  }
}

std::vector<float> to_float(const std::vector<double>& v) {
  return std::vector<float>(v.begin(), v.end());
}

struct VocoderExample {
  std::vector<float> samples;
  Eigen::MatrixXd mel;  // frames x mel, frame f covers samples [f*hop, ...)
  int speaker = 0;
  int emotion = 0;
  long usable_offsets = 0;  // valid crop start frames
};

std::vector<VocoderExample> load_vocoder_examples(
    const Manifest& m, const std::string& cache_dir, long hop,
    long crop_frames) {
  std::vector<VocoderExample> out;
  for (const auto& e : m.entries) {
    VocoderExample ex;
    dsp::Waveform w = dsp::read_wav(e.wav_path);
    ex.samples = w.samples;
    Eigen::MatrixXf mel = load_cached_mel(cache_dir, e.cache_key());
    ex.mel = mel.cast<double>();
    ex.speaker = e.speaker_id;
    ex.emotion = e.emotion_id;
    const long len = static_cast<long>(ex.samples.size());
    ex.usable_offsets = len / hop - crop_frames + 1;
    if (ex.usable_offsets > ex.mel.rows() - crop_frames + 1)
      ex.usable_offsets = ex.mel.rows() - crop_frames + 1;
    if (ex.usable_offsets > 0) out.push_back(std::move(ex));
  }
  if (out.empty())
    throw DataError("no utterance is long enough for one training crop");
  return out;
}

}  // namespace

TrainResult train_conversion(const Manifest& m, const std::string& cache_dir,
                             const RunConfig& cfg, int source_emotion,
                             const std::string& out_dir) {
  cfg.conversion.validate();
  cfg.training.validate();
  if (source_emotion < 0 ||
      source_emotion >= static_cast<int>(m.emotions.size()))
    throw UsageError("source emotion " + std::to_string(source_emotion) +
                     " outside the manifest's emotion table");
  for (const auto& e : m.entries)
    if (e.emotion_id >= cfg.conversion.num_emotions)
      throw DataError("entry '" + e.utterance_id + "': emotion_id " +
                      std::to_string(e.emotion_id) +
                      " outside the conversion model's emotion table");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + out_dir + "'");

  // Parallel pairing: same speaker and utterance id, source emotion
  // against every other emotion.
  std::map<std::pair<int, std::string>, std::map<int, const ManifestEntry*>>
      groups;
  for (const auto& e : m.entries)
    groups[{e.speaker_id, e.utterance_id}][e.emotion_id] = &e;

  const dsp::SpectrogramConfig& fcfg = cfg.features;
  std::vector<models::TrainingPair> pairs;
  for (const auto& [key, cell] : groups) {
    auto src_it = cell.find(source_emotion);
    if (src_it == cell.end()) continue;
    const ManifestEntry* src = src_it->second;

    dsp::MelSpectrogram src_mel;
    src_mel.values =
        load_cached_mel(cache_dir, src->cache_key()).cast<double>();
    src_mel.config = fcfg;
    Eigen::MatrixXd ppg;
    if (cfg.conversion.use_ppg) {
      if (src->ppg_path.empty())
        throw DataError("entry '" + src->utterance_id +
                        "' has no PPG file but the model requires PPGs");
      ppg = read_feature_file(src->ppg_path, kPpgMagic).cast<double>();
      if (ppg.cols() != cfg.conversion.ppg_dim)
        throw DataError("PPG '" + src->ppg_path + "' has width " +
                        std::to_string(ppg.cols()) + ", config expects " +
                        std::to_string(cfg.conversion.ppg_dim));
    }

    for (const auto& [emotion, tgt] : cell) {
      if (emotion == source_emotion) continue;
      dsp::MelSpectrogram tgt_mel;
      tgt_mel.values =
          load_cached_mel(cache_dir, tgt->cache_key()).cast<double>();
      tgt_mel.config = fcfg;
      pairs.push_back(models::prepare_pair(
          src_mel, cfg.conversion.use_ppg ? &ppg : nullptr, tgt_mel,
          emotion));
    }
  }
  if (pairs.empty())
    throw DataError("manifest holds no parallel utterances pairing source "
                    "emotion '" + m.emotions[source_emotion] +
                    "' with any other emotion");

  std::vector<const models::TrainingPair*> train, val;
  const bool split = pairs.size() >= 8;
  for (size_t i = 0; i < pairs.size(); ++i) {
    if (split && i % 5 == 4)
      val.push_back(&pairs[i]);
    else
      train.push_back(&pairs[i]);
  }

  std::vector<const Eigen::MatrixXd*> in_mats, out_mats;
  for (const auto* p : train) {
    in_mats.push_back(&p->input);
    out_mats.push_back(&p->target);
  }
  std::vector<float> in_mean, in_std, out_mean, out_std;
  matrix_stats(in_mats, in_mean, in_std);
  matrix_stats(out_mats, out_mean, out_std);

  Rng rng(cfg.seed);
  models::ConversionModel<float> model(cfg.conversion, rng);
  model.set_normalization(in_mean, in_std, out_mean, out_std);
  autodiff::Adam<float> opt(
      model.params(),
      {cfg.training.conversion_lr, 0.9, 0.999, 1e-8, 0});
  const uint64_t fp = conversion_fingerprint(cfg);
  CheckpointRotation rotation(cfg.training.checkpoint_keep);

  TrainResult result;
  std::printf("[train-conversion] %zu train / %zu validation pairs, %ld "
              "parameters\n",
              train.size(), val.size(), model.params().trainable_count());
  for (long step = 1; step <= cfg.training.conversion_steps; ++step) {
    const auto* pair = train[rng.below(train.size())];
    double loss = model.train_step(*pair, opt);
    result.losses.push_back(loss);
    if (!std::isfinite(loss))
      throw TrainingDiverged("conversion loss became non-finite at step " +
                             std::to_string(step));
    if (cfg.training.log_every > 0 && step % cfg.training.log_every == 0)
      std::printf("[train-conversion] step %6ld loss %.6f\n", step, loss);
    if (!val.empty() && cfg.training.validate_every > 0 &&
        step % cfg.training.validate_every == 0) {
      double acc = 0.0;
      long n = 0;
      for (const auto* p : val) {
        Eigen::MatrixXd pred = model.convert(p->input, p->emotion);
        acc += (pred - p->target).cwiseAbs().sum();
        n += pred.size();
      }
      double v = acc / n;
      result.validation.push_back({step, v});
      std::printf("[train-conversion] step %6ld val_l1 %.6f\n", step, v);
    }
    if (step % cfg.training.checkpoint_every == 0) {
      std::string path = step_path(out_dir, "conversion", step);
      autodiff::save_checkpoint(path, model.params(), fp, &opt);
      rotation.add(path);
    }
  }
  result.steps = cfg.training.conversion_steps;
  result.checkpoint_path = (fs::path(out_dir) / "conversion.ckpt").string();
  autodiff::save_checkpoint(result.checkpoint_path, model.params(), fp, &opt);
  return result;
}

TrainResult train_vocoder(const Manifest& m, const std::string& cache_dir,
                          const RunConfig& cfg, const std::string& kind,
                          const std::string& out_dir) {
  if (kind != "wavenet" && kind != "flowavenet")
    throw UsageError("unknown vocoder kind '" + kind +
                     "' (expected wavenet or flowavenet)");
  cfg.training.validate();
  const bool is_wavenet = kind == "wavenet";
  const int num_speakers = is_wavenet ? cfg.wavenet.num_speakers
                                      : cfg.flowavenet.num_speakers;
  const int num_emotions = is_wavenet ? cfg.wavenet.num_emotions
                                      : cfg.flowavenet.num_emotions;
  for (const auto& e : m.entries) {
    if (e.speaker_id >= num_speakers)
      throw DataError("entry '" + e.utterance_id + "': speaker_id " +
                      std::to_string(e.speaker_id) + " outside the " + kind +
                      " speaker table");
    if (e.emotion_id >= num_emotions)
      throw DataError("entry '" + e.utterance_id + "': emotion_id " +
                      std::to_string(e.emotion_id) + " outside the " + kind +
                      " emotion table");
  }
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + out_dir + "'");

  const long hop = is_wavenet ? cfg.wavenet.hop() : cfg.flowavenet.hop();
  if (cfg.training.crop_samples % hop != 0)
    throw UsageError("crop_samples must be a multiple of the Mel hop " +
                     std::to_string(hop));
  if (!is_wavenet &&
      cfg.training.crop_samples % cfg.flowavenet.squeeze_factor() != 0)
    throw UsageError("crop_samples must be a multiple of the squeeze "
                     "factor " +
                     std::to_string(cfg.flowavenet.squeeze_factor()));
  const long crop_frames = cfg.training.crop_samples / hop;
  auto examples = load_vocoder_examples(m, cache_dir, hop, crop_frames);

  FeatureStats stats = load_feature_stats(cache_dir);

  Rng rng(cfg.seed);
  TrainResult result;
  CheckpointRotation rotation(cfg.training.checkpoint_keep);

  auto run = [&](auto& model, auto&& step_fn, uint64_t fp) {
    model.set_mel_normalization(to_float(stats.mean), to_float(stats.stddev));
    std::printf("[train-vocoder %s] %zu utterances, %ld parameters\n",
                kind.c_str(), examples.size(),
                model.params().trainable_count());
    for (long step = 1; step <= cfg.training.vocoder_steps; ++step) {
      const auto& ex = examples[rng.below(examples.size())];
      const long f0 = static_cast<long>(rng.below(ex.usable_offsets));
      double loss = step_fn(ex, f0);
      result.losses.push_back(loss);
      if (!std::isfinite(loss))
        throw TrainingDiverged(kind + " loss became non-finite at step " +
                               std::to_string(step));
      if (cfg.training.log_every > 0 && step % cfg.training.log_every == 0)
        std::printf("[train-vocoder %s] step %6ld loss %.6f\n", kind.c_str(),
                    step, loss);
      if (step % cfg.training.checkpoint_every == 0) {
        std::string path = step_path(out_dir, kind, step);
        autodiff::save_checkpoint(path, model.params(), fp);
        rotation.add(path);
      }
    }
    result.steps = cfg.training.vocoder_steps;
    result.checkpoint_path = (fs::path(out_dir) / (kind + ".ckpt")).string();
    autodiff::save_checkpoint(result.checkpoint_path, model.params(), fp);
  };

  if (is_wavenet) {
    models::WaveNetModel<float> model(cfg.wavenet, rng);
    autodiff::Adam<float> opt(model.params(),
                              {cfg.training.wavenet_lr, 0.9, 0.999, 1e-8,
                               cfg.training.wavenet_lr_decay_steps});
    run(model,
        [&](const VocoderExample& ex, long f0) {
          const long s0 = f0 * hop;
          const long n = cfg.training.crop_samples;
          std::vector<int> targets(n);
          const int classes = cfg.wavenet.classes;
          for (long t = 0; t < n; ++t)
            targets[t] = dsp::mu_law_quantize(ex.samples[s0 + t], classes);
          int prev = s0 > 0
                         ? dsp::mu_law_quantize(ex.samples[s0 - 1], classes)
                         : model.zero_class();
          return model.train_step(targets, prev,
                                  ex.mel.middleRows(f0, crop_frames),
                                  ex.speaker, ex.emotion, opt);
        },
        wavenet_fingerprint(cfg));
  } else {
    models::FlowModel<float> model(cfg.flowavenet, rng);
    autodiff::Adam<float> opt(model.params(),
                              {cfg.training.flow_lr, 0.9, 0.999, 1e-8,
                               cfg.training.flow_lr_decay_steps});
    run(model,
        [&](const VocoderExample& ex, long f0) {
          const long s0 = f0 * hop;
          const long n = cfg.training.crop_samples;
          std::vector<float> crop(ex.samples.begin() + s0,
                                  ex.samples.begin() + s0 + n);
          return model.train_step(crop, ex.mel.middleRows(f0, crop_frames),
                                  ex.speaker, ex.emotion, opt);
        },
        flowavenet_fingerprint(cfg));
  }
  return result;
}

}  // namespace mtevc::pipeline
