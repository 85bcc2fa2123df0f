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

#include <map>
#include <string>
#include <vector>

#include "mtevc/dsp/spectrogram.hpp"
#include "mtevc/dsp/waveform.hpp"

namespace mtevc::eval {

// Objective distortion between one converted/target utterance pair.
struct UtteranceMetrics {
  double mcd_db = 0.0;
  double logf0_mse = 0.0;
  bool logf0_defined = false;  // false when no frame is voiced in both
  long voiced_overlap = 0;     // aligned frame pairs voiced in both
};

// Mean Mel-cepstral distortion over the alignment path between two cepstral
// sequences: per aligned pair, (10/ln 10) * sqrt(2 * sum of squared
// coefficient differences).
double mcd_from_cepstra(const dsp::MelCepstrum& converted,
                        const dsp::MelCepstrum& target);

// Full comparison: Mel-cepstra are extracted from both waveforms and
// aligned by DTW; MCD averages over the path, and the log-F0 MSE runs over
// the same path restricted to frames voiced in both signals.
UtteranceMetrics compare_waveforms(const dsp::Waveform& converted,
                                   const dsp::Waveform& target,
                                   const dsp::SpectrogramConfig& cfg = {});

double mcd(const dsp::Waveform& converted, const dsp::Waveform& target);
double logf0_mse(const dsp::Waveform& converted, const dsp::Waveform& target);

// One converted/target file pair tagged with its target emotion.
struct EvalPair {
  std::string id;
  std::string emotion;
  std::string converted_path;
  std::string target_path;
};

struct EmotionAggregate {
  double mcd_db = 0.0;
  double logf0_mse = 0.0;  // NaN when every utterance was undefined
  long n_utts = 0;
  long n_undefined = 0;
};

struct EvalReport {
  struct Row {
    std::string id;
    std::string emotion;
    UtteranceMetrics metrics;
  };
  std::vector<Row> utterances;
  std::map<std::string, EmotionAggregate> per_emotion;
  std::vector<std::string> missing;  // unreadable files, excluded from means

  std::string to_json() const;
  std::string to_table() const;
};

// Evaluates every readable pair and aggregates per emotion by arithmetic
// mean; pairs with unreadable files are listed and skipped.
EvalReport evaluate_pairs(const std::vector<EvalPair>& pairs,
                          const dsp::SpectrogramConfig& cfg = {});

}  // namespace mtevc::eval
