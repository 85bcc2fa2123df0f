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

#include <ostream>
#include <string>

#include "mtevc/eval/metrics.hpp"
#include "mtevc/pipeline/config.hpp"

namespace mtevc::pipeline {

// One conversion run: source audio -> converted Mel under the target
// emotion -> waveform through the selected generator.
struct ConvertRequest {
  std::string source_wav;
  std::string source_ppg;  // PPGF file; required when the model uses PPGs
  int target_emotion = -1;
  int target_speaker = 0;  // vocoder conditioning
  std::string conversion_checkpoint;
  std::string generator = "griffinlim";  // wavenet | flowavenet
  std::string vocoder_checkpoint;        // unused for griffinlim
  std::string out_wav;
};

// Checkpoint fingerprints are verified against the config before any
// audio is read; a mismatch raises CompatibilityError immediately.
void convert_utterance(const RunConfig& cfg, const ConvertRequest& req);

// Vocoder copy-synthesis: source audio -> Mel -> waveform.
struct SynthesizeRequest {
  std::string source_wav;
  int speaker = 0;
  int emotion = 0;
  std::string generator = "griffinlim";
  std::string vocoder_checkpoint;
  std::string out_wav;
};

void synthesize_utterance(const RunConfig& cfg, const SynthesizeRequest& req);

// Evaluates a JSON list of converted/target pairs
// ({"pairs": [{"id", "emotion", "converted", "target"}]}, paths relative
// to the JSON file) and writes report.json and report.txt into out_dir.
eval::EvalReport evaluate_command(const std::string& pairs_json,
                                  const dsp::SpectrogramConfig& cfg,
                                  const std::string& out_dir);

// Finite-difference verification of the three model families at desk
// scale; prints one line per check. Returns false when any gradient
// deviates beyond tolerance.
bool run_gradcheck(std::ostream& os);

}  // namespace mtevc::pipeline
