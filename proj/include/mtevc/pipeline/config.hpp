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

#pragma once

#include <cstdint>
#include <string>

#include "mtevc/dsp/spectrogram.hpp"
#include "mtevc/models/conversion.hpp"
#include "mtevc/models/flowavenet.hpp"
#include "mtevc/models/wavenet.hpp"

namespace mtevc::pipeline {

struct TrainingSettings {
  long conversion_steps = 2000;
  long vocoder_steps = 2000;
  double conversion_lr = 1e-3;
  double wavenet_lr = 1e-3;
  double flow_lr = 1e-3;
  long wavenet_lr_decay_steps = 200000;  // halve the rate every N steps
  long flow_lr_decay_steps = 100000;
  long crop_samples = 4096;
  long checkpoint_every = 500;
  int checkpoint_keep = 3;
  long validate_every = 200;
  long log_every = 100;
  double griffin_lim_iters = 60;

  void validate() const;
};

// Every knob of a reproducible run. The canonical serialization of the
// feature section plus one model section hashes to that model's checkpoint
// fingerprint, so checkpoints refuse to load under a changed configuration.
struct RunConfig {
  uint64_t seed = 1234;
  dsp::SpectrogramConfig features;
  models::ConversionConfig conversion;
  models::WaveNetConfig wavenet;
  models::FlowConfig flowavenet;
  TrainingSettings training;
};

// Reads a JSON run config; absent keys keep their defaults, unknown keys
// are rejected with UsageError so typos cannot silently change a run.
RunConfig load_run_config(const std::string& path);
void save_run_config(const RunConfig& cfg, const std::string& path);

// Deterministic key=value text, one line per field, fixed order.
std::string canonical_text(const RunConfig& cfg);

uint64_t features_fingerprint(const RunConfig& cfg);
uint64_t conversion_fingerprint(const RunConfig& cfg);
uint64_t wavenet_fingerprint(const RunConfig& cfg);
uint64_t flowavenet_fingerprint(const RunConfig& cfg);

}  // namespace mtevc::pipeline
