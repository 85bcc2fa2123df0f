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

#include <string>
#include <utility>
#include <vector>

#include "mtevc/pipeline/config.hpp"
#include "mtevc/pipeline/manifest.hpp"

namespace mtevc::pipeline {

struct TrainResult {
  std::string checkpoint_path;
  std::vector<double> losses;  // one value per optimization step
  std::vector<std::pair<long, double>> validation;  // (step, mean L1)
  long steps = 0;
};

// Trains the multi-target conversion model on every (source_emotion ->
// other emotion) pair of the same speaker and utterance id. Features come
// from the prepare cache. Writes cadence checkpoints and a final
// <out_dir>/conversion.ckpt. Throws DataError when the manifest holds no
// parallel pairs and TrainingDiverged on a non-finite loss.
TrainResult train_conversion(const Manifest& m, const std::string& cache_dir,
                             const RunConfig& cfg, int source_emotion,
                             const std::string& out_dir);

// Trains one vocoder ("wavenet" or "flowavenet") on random fixed-length
// crops of all utterances jointly, conditioned on speaker and emotion ids.
// Unknown kind -> UsageError; conditioning ids outside the model tables are
// rejected before any training step runs.
TrainResult train_vocoder(const Manifest& m, const std::string& cache_dir,
                          const RunConfig& cfg, const std::string& kind,
                          const std::string& out_dir);

}  // namespace mtevc::pipeline
