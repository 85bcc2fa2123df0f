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

#include "mtevc/pipeline/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "mtevc/error.hpp"
#include "mtevc/rng.hpp"

namespace mtevc::pipeline {

namespace {

using nlohmann::json;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt(const std::vector<int>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i)
    s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

void check_keys(const json& j, const std::string& section,
                const std::set<std::string>& allowed) {
  if (!j.is_object())
    throw UsageError("config: section '" + section + "' must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw UsageError("config: unknown key '" + section + "." + it.key() +
                       "'");
}

void read_features(const json& j, dsp::SpectrogramConfig& c) {
  check_keys(j, "features",
             {"fft_size", "win_length", "hop_length", "num_mels", "fmin_hz",
              "fmax_hz", "log_floor"});
  c.fft_size = j.value("fft_size", c.fft_size);
  c.win_length = j.value("win_length", c.win_length);
  c.hop_length = j.value("hop_length", c.hop_length);
  c.num_mels = j.value("num_mels", c.num_mels);
  c.fmin_hz = j.value("fmin_hz", c.fmin_hz);
  c.fmax_hz = j.value("fmax_hz", c.fmax_hz);
  c.log_floor = j.value("log_floor", c.log_floor);
}

void read_conversion(const json& j, models::ConversionConfig& c) {
  check_keys(j, "conversion",
             {"mel_dim", "ppg_dim", "use_ppg", "num_emotions",
              "emotion_embed_dim", "dense_units", "dense_layers",
              "blstm_layers", "blstm_units", "grad_clip_norm"});
  c.mel_dim = j.value("mel_dim", c.mel_dim);
  c.ppg_dim = j.value("ppg_dim", c.ppg_dim);
  c.use_ppg = j.value("use_ppg", c.use_ppg);
  c.num_emotions = j.value("num_emotions", c.num_emotions);
  c.emotion_embed_dim = j.value("emotion_embed_dim", c.emotion_embed_dim);
  c.dense_units = j.value("dense_units", c.dense_units);
  c.dense_layers = j.value("dense_layers", c.dense_layers);
  c.blstm_layers = j.value("blstm_layers", c.blstm_layers);
  c.blstm_units = j.value("blstm_units", c.blstm_units);
  c.grad_clip_norm = j.value("grad_clip_norm", c.grad_clip_norm);
}

void read_wavenet(const json& j, models::WaveNetConfig& c) {
  check_keys(j, "wavenet",
             {"cycles", "dilations_per_cycle", "kernel", "residual_channels",
              "gate_channels", "skip_channels", "classes", "mel_dim",
              "num_speakers", "num_emotions", "speaker_embed_dim",
              "emotion_embed_dim", "upsample_strides"});
  c.cycles = j.value("cycles", c.cycles);
  c.dilations_per_cycle = j.value("dilations_per_cycle",
                                  c.dilations_per_cycle);
  c.kernel = j.value("kernel", c.kernel);
  c.residual_channels = j.value("residual_channels", c.residual_channels);
  c.gate_channels = j.value("gate_channels", c.gate_channels);
  c.skip_channels = j.value("skip_channels", c.skip_channels);
  c.classes = j.value("classes", c.classes);
  c.mel_dim = j.value("mel_dim", c.mel_dim);
  c.num_speakers = j.value("num_speakers", c.num_speakers);
  c.num_emotions = j.value("num_emotions", c.num_emotions);
  c.speaker_embed_dim = j.value("speaker_embed_dim", c.speaker_embed_dim);
  c.emotion_embed_dim = j.value("emotion_embed_dim", c.emotion_embed_dim);
  c.upsample_strides = j.value("upsample_strides", c.upsample_strides);
}

void read_flow(const json& j, models::FlowConfig& c) {
  check_keys(j, "flowavenet",
             {"blocks", "flows_per_block", "coupling_stacks",
              "dilations_per_stack", "coupling_kernel", "coupling_channels",
              "mel_dim", "num_speakers", "num_emotions", "speaker_embed_dim",
              "emotion_embed_dim", "upsample_strides"});
  c.blocks = j.value("blocks", c.blocks);
  c.flows_per_block = j.value("flows_per_block", c.flows_per_block);
  c.coupling_stacks = j.value("coupling_stacks", c.coupling_stacks);
  c.dilations_per_stack = j.value("dilations_per_stack",
                                  c.dilations_per_stack);
  c.coupling_kernel = j.value("coupling_kernel", c.coupling_kernel);
  c.coupling_channels = j.value("coupling_channels", c.coupling_channels);
  c.mel_dim = j.value("mel_dim", c.mel_dim);
  c.num_speakers = j.value("num_speakers", c.num_speakers);
  c.num_emotions = j.value("num_emotions", c.num_emotions);
  c.speaker_embed_dim = j.value("speaker_embed_dim", c.speaker_embed_dim);
  c.emotion_embed_dim = j.value("emotion_embed_dim", c.emotion_embed_dim);
  c.upsample_strides = j.value("upsample_strides", c.upsample_strides);
}

void read_training(const json& j, TrainingSettings& c) {
  check_keys(j, "training",
             {"conversion_steps", "vocoder_steps", "conversion_lr",
              "wavenet_lr", "flow_lr", "wavenet_lr_decay_steps",
              "flow_lr_decay_steps", "crop_samples", "checkpoint_every",
              "checkpoint_keep", "validate_every", "log_every",
              "griffin_lim_iters"});
  c.conversion_steps = j.value("conversion_steps", c.conversion_steps);
  c.vocoder_steps = j.value("vocoder_steps", c.vocoder_steps);
  c.conversion_lr = j.value("conversion_lr", c.conversion_lr);
  c.wavenet_lr = j.value("wavenet_lr", c.wavenet_lr);
  c.flow_lr = j.value("flow_lr", c.flow_lr);
  c.wavenet_lr_decay_steps = j.value("wavenet_lr_decay_steps",
                                     c.wavenet_lr_decay_steps);
  c.flow_lr_decay_steps = j.value("flow_lr_decay_steps",
                                  c.flow_lr_decay_steps);
  c.crop_samples = j.value("crop_samples", c.crop_samples);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  c.checkpoint_keep = j.value("checkpoint_keep", c.checkpoint_keep);
  c.validate_every = j.value("validate_every", c.validate_every);
  c.log_every = j.value("log_every", c.log_every);
  c.griffin_lim_iters = j.value("griffin_lim_iters", c.griffin_lim_iters);
}

std::string features_text(const RunConfig& cfg) {
  std::ostringstream o;
  const auto& f = cfg.features;
  o << "features.fft_size=" << f.fft_size << "\n"
    << "features.win_length=" << f.win_length << "\n"
    << "features.hop_length=" << f.hop_length << "\n"
    << "features.num_mels=" << f.num_mels << "\n"
    << "features.fmin_hz=" << fmt(f.fmin_hz) << "\n"
    << "features.fmax_hz=" << fmt(f.fmax_hz) << "\n"
    << "features.log_floor=" << fmt(f.log_floor) << "\n";
  return o.str();
}

std::string conversion_text(const RunConfig& cfg) {
  std::ostringstream o;
  const auto& c = cfg.conversion;
  o << "conversion.mel_dim=" << c.mel_dim << "\n"
    << "conversion.ppg_dim=" << c.ppg_dim << "\n"
    << "conversion.use_ppg=" << (c.use_ppg ? 1 : 0) << "\n"
    << "conversion.num_emotions=" << c.num_emotions << "\n"
    << "conversion.emotion_embed_dim=" << c.emotion_embed_dim << "\n"
    << "conversion.dense_units=" << c.dense_units << "\n"
    << "conversion.dense_layers=" << c.dense_layers << "\n"
    << "conversion.blstm_layers=" << c.blstm_layers << "\n"
    << "conversion.blstm_units=" << c.blstm_units << "\n"
    << "conversion.grad_clip_norm=" << fmt(c.grad_clip_norm) << "\n";
  return o.str();
}

std::string wavenet_text(const RunConfig& cfg) {
  std::ostringstream o;
  const auto& c = cfg.wavenet;
  o << "wavenet.cycles=" << c.cycles << "\n"
    << "wavenet.dilations_per_cycle=" << c.dilations_per_cycle << "\n"
    << "wavenet.kernel=" << c.kernel << "\n"
    << "wavenet.residual_channels=" << c.residual_channels << "\n"
    << "wavenet.gate_channels=" << c.gate_channels << "\n"
    << "wavenet.skip_channels=" << c.skip_channels << "\n"
    << "wavenet.classes=" << c.classes << "\n"
    << "wavenet.mel_dim=" << c.mel_dim << "\n"
    << "wavenet.num_speakers=" << c.num_speakers << "\n"
    << "wavenet.num_emotions=" << c.num_emotions << "\n"
    << "wavenet.speaker_embed_dim=" << c.speaker_embed_dim << "\n"
    << "wavenet.emotion_embed_dim=" << c.emotion_embed_dim << "\n"
    << "wavenet.upsample_strides=" << fmt(c.upsample_strides) << "\n";
  return o.str();
}

std::string flow_text(const RunConfig& cfg) {
  std::ostringstream o;
  const auto& c = cfg.flowavenet;
  o << "flowavenet.blocks=" << c.blocks << "\n"
    << "flowavenet.flows_per_block=" << c.flows_per_block << "\n"
    << "flowavenet.coupling_stacks=" << c.coupling_stacks << "\n"
    << "flowavenet.dilations_per_stack=" << c.dilations_per_stack << "\n"
    << "flowavenet.coupling_kernel=" << c.coupling_kernel << "\n"
    << "flowavenet.coupling_channels=" << c.coupling_channels << "\n"
    << "flowavenet.mel_dim=" << c.mel_dim << "\n"
    << "flowavenet.num_speakers=" << c.num_speakers << "\n"
    << "flowavenet.num_emotions=" << c.num_emotions << "\n"
    << "flowavenet.speaker_embed_dim=" << c.speaker_embed_dim << "\n"
    << "flowavenet.emotion_embed_dim=" << c.emotion_embed_dim << "\n"
    << "flowavenet.upsample_strides=" << fmt(c.upsample_strides) << "\n";
  return o.str();
}

std::string training_text(const RunConfig& cfg) {
  std::ostringstream o;
  const auto& t = cfg.training;
  o << "training.conversion_steps=" << t.conversion_steps << "\n"
    << "training.vocoder_steps=" << t.vocoder_steps << "\n"
    << "training.conversion_lr=" << fmt(t.conversion_lr) << "\n"
    << "training.wavenet_lr=" << fmt(t.wavenet_lr) << "\n"
    << "training.flow_lr=" << fmt(t.flow_lr) << "\n"
    << "training.wavenet_lr_decay_steps=" << t.wavenet_lr_decay_steps << "\n"
    << "training.flow_lr_decay_steps=" << t.flow_lr_decay_steps << "\n"
    << "training.crop_samples=" << t.crop_samples << "\n"
    << "training.checkpoint_every=" << t.checkpoint_every << "\n"
    << "training.checkpoint_keep=" << t.checkpoint_keep << "\n"
    << "training.validate_every=" << t.validate_every << "\n"
    << "training.log_every=" << t.log_every << "\n"
    << "training.griffin_lim_iters=" << fmt(t.griffin_lim_iters) << "\n";
  return o.str();
}

}  // namespace

void TrainingSettings::validate() const {
  if (conversion_steps < 0 || vocoder_steps < 0)
    throw UsageError("config: step counts must be non-negative");
  if (conversion_lr <= 0 || wavenet_lr <= 0 || flow_lr <= 0)
    throw UsageError("config: learning rates must be positive");
  if (crop_samples <= 0)
    throw UsageError("config: crop_samples must be positive");
  if (checkpoint_every <= 0 || checkpoint_keep <= 0)
    throw UsageError("config: checkpoint cadence must be positive");
  if (griffin_lim_iters < 1)
    throw UsageError("config: griffin_lim_iters must be at least 1");
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config '" + path + "'");
  json j;
  try {
    is >> j;
  } catch (const json::exception& ex) {
    throw UsageError("config '" + path + "': " + ex.what());
  }
  check_keys(j, "(top level)",
             {"seed", "features", "conversion", "wavenet", "flowavenet",
              "training"});
  RunConfig cfg;
  try {
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("features")) read_features(j["features"], cfg.features);
    if (j.contains("conversion"))
      read_conversion(j["conversion"], cfg.conversion);
    if (j.contains("wavenet")) read_wavenet(j["wavenet"], cfg.wavenet);
    if (j.contains("flowavenet")) read_flow(j["flowavenet"], cfg.flowavenet);
    if (j.contains("training")) read_training(j["training"], cfg.training);
  } catch (const json::exception& ex) {
    throw UsageError("config '" + path + "': " + ex.what());
  }
  cfg.conversion.validate();
  cfg.wavenet.validate();
  cfg.flowavenet.validate();
  cfg.training.validate();
  return cfg;
}

void save_run_config(const RunConfig& cfg, const std::string& path) {
  json j;
  j["seed"] = cfg.seed;
  j["features"] = {{"fft_size", cfg.features.fft_size},
                   {"win_length", cfg.features.win_length},
                   {"hop_length", cfg.features.hop_length},
                   {"num_mels", cfg.features.num_mels},
                   {"fmin_hz", cfg.features.fmin_hz},
                   {"fmax_hz", cfg.features.fmax_hz},
                   {"log_floor", cfg.features.log_floor}};
  j["conversion"] = {{"mel_dim", cfg.conversion.mel_dim},
                     {"ppg_dim", cfg.conversion.ppg_dim},
                     {"use_ppg", cfg.conversion.use_ppg},
                     {"num_emotions", cfg.conversion.num_emotions},
                     {"emotion_embed_dim", cfg.conversion.emotion_embed_dim},
                     {"dense_units", cfg.conversion.dense_units},
                     {"dense_layers", cfg.conversion.dense_layers},
                     {"blstm_layers", cfg.conversion.blstm_layers},
                     {"blstm_units", cfg.conversion.blstm_units},
                     {"grad_clip_norm", cfg.conversion.grad_clip_norm}};
  j["wavenet"] = {{"cycles", cfg.wavenet.cycles},
                  {"dilations_per_cycle", cfg.wavenet.dilations_per_cycle},
                  {"kernel", cfg.wavenet.kernel},
                  {"residual_channels", cfg.wavenet.residual_channels},
                  {"gate_channels", cfg.wavenet.gate_channels},
                  {"skip_channels", cfg.wavenet.skip_channels},
                  {"classes", cfg.wavenet.classes},
                  {"mel_dim", cfg.wavenet.mel_dim},
                  {"num_speakers", cfg.wavenet.num_speakers},
                  {"num_emotions", cfg.wavenet.num_emotions},
                  {"speaker_embed_dim", cfg.wavenet.speaker_embed_dim},
                  {"emotion_embed_dim", cfg.wavenet.emotion_embed_dim},
                  {"upsample_strides", cfg.wavenet.upsample_strides}};
  j["flowavenet"] = {
      {"blocks", cfg.flowavenet.blocks},
      {"flows_per_block", cfg.flowavenet.flows_per_block},
      {"coupling_stacks", cfg.flowavenet.coupling_stacks},
      {"dilations_per_stack", cfg.flowavenet.dilations_per_stack},
      {"coupling_kernel", cfg.flowavenet.coupling_kernel},
      {"coupling_channels", cfg.flowavenet.coupling_channels},
      {"mel_dim", cfg.flowavenet.mel_dim},
      {"num_speakers", cfg.flowavenet.num_speakers},
      {"num_emotions", cfg.flowavenet.num_emotions},
      {"speaker_embed_dim", cfg.flowavenet.speaker_embed_dim},
      {"emotion_embed_dim", cfg.flowavenet.emotion_embed_dim},
      {"upsample_strides", cfg.flowavenet.upsample_strides}};
  j["training"] = {
      {"conversion_steps", cfg.training.conversion_steps},
      {"vocoder_steps", cfg.training.vocoder_steps},
      {"conversion_lr", cfg.training.conversion_lr},
      {"wavenet_lr", cfg.training.wavenet_lr},
      {"flow_lr", cfg.training.flow_lr},
      {"wavenet_lr_decay_steps", cfg.training.wavenet_lr_decay_steps},
      {"flow_lr_decay_steps", cfg.training.flow_lr_decay_steps},
      {"crop_samples", cfg.training.crop_samples},
      {"checkpoint_every", cfg.training.checkpoint_every},
      {"checkpoint_keep", cfg.training.checkpoint_keep},
      {"validate_every", cfg.training.validate_every},
      {"log_every", cfg.training.log_every},
      {"griffin_lim_iters", cfg.training.griffin_lim_iters}};
  std::ofstream os(path);
  if (!os) throw IoError("cannot write config '" + path + "'");
  os << j.dump(2) << "\n";
  if (!os) throw IoError("write failed for config '" + path + "'");
}

std::string canonical_text(const RunConfig& cfg) {
  return "seed=" + std::to_string(cfg.seed) + "\n" + features_text(cfg) +
         conversion_text(cfg) + wavenet_text(cfg) + flow_text(cfg) +
         training_text(cfg);
}

uint64_t features_fingerprint(const RunConfig& cfg) {
  return fnv1a64(features_text(cfg));
}

uint64_t conversion_fingerprint(const RunConfig& cfg) {
  return fnv1a64(features_text(cfg) + conversion_text(cfg));
}

uint64_t wavenet_fingerprint(const RunConfig& cfg) {
  return fnv1a64(features_text(cfg) + wavenet_text(cfg));
}

uint64_t flowavenet_fingerprint(const RunConfig& cfg) {
  return fnv1a64(features_text(cfg) + flow_text(cfg));
}

}  // namespace mtevc::pipeline
