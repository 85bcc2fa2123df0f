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
#include <vector>

#include "mtevc/pipeline/manifest.hpp"

namespace mtevc::pipeline {

// Parameters of the generated parallel corpus. Every utterance id carries
// one melody and energy contour shared by all speakers and emotions;
// speakers choose the base pitch and emotions modulate pitch, vibrato,
// spectral tilt, and duration on top of it.
struct SyntheticCorpusSpec {
  int num_speakers = 2;
  int num_emotions = 3;
  int utterances_per_cell = 5;
  double min_duration_s = 0.5;
  double max_duration_s = 0.9;
  int sample_rate_hz = 16000;
  int ppg_dim = 131;
  int ppg_hop = 256;  // matches the Mel hop so frame counts line up

  std::vector<double> speaker_base_f0_hz = {145.0, 210.0, 120.0, 235.0};
  std::vector<std::string> emotion_names = {"happy",    "sad",  "angry",
                                            "surprise", "fear", "neutral"};
  std::vector<double> emotion_f0_multiplier = {1.15, 0.85, 1.3,
                                               1.2,  0.95, 1.0};
  std::vector<double> emotion_vibrato_hz = {5.5, 3.0, 6.5, 6.0, 4.5, 4.0};
  std::vector<double> emotion_tilt = {-0.1, 0.25, -0.2, -0.05, 0.15, 0.0};
  std::vector<double> emotion_duration_factor = {0.95, 1.15, 0.9,
                                                 0.92, 1.05, 1.0};

  void validate() const;  // throws InvalidInput
};

// Writes WAVs under <out_dir>/wavs, pseudo-PPG matrices (row-stochastic,
// derived from the quantized melody and energy contours so parallel
// utterances share trajectories) under <out_dir>/ppgs, and
// <out_dir>/manifest.json. Returns the loaded, validated manifest.
// Deterministic for a fixed (spec, seed). Unwritable out_dir -> IoError.
Manifest synth_dataset(const SyntheticCorpusSpec& spec,
                       const std::string& out_dir, uint64_t seed);

}  // namespace mtevc::pipeline
