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

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "mtevc/dsp/spectrogram.hpp"
#include "mtevc/pipeline/manifest.hpp"

namespace mtevc::pipeline {

inline constexpr char kMelMagic[5] = "MELF";
inline constexpr char kPpgMagic[5] = "PPGF";

// Binary feature record: 4-byte magic, u32 rows, u32 cols, then rows*cols
// little-endian 32-bit floats in row-major order.
void write_feature_file(const std::string& path, const char magic[4],
                        const Eigen::MatrixXf& values);
Eigen::MatrixXf read_feature_file(const std::string& path,
                                  const char magic[4]);

// Per-dimension z-score statistics over every cached Mel frame.
struct FeatureStats {
  std::vector<double> mean;
  std::vector<double> stddev;  // floored at 1e-6
  long frames = 0;
};

struct PrepareReport {
  long computed = 0;
  long cached = 0;
  std::vector<std::string> failed;  // "<cache key>: <reason>"
};

// Extracts log-Mel features for every manifest entry into
// <cache_dir>/<cache key>.melf, skipping entries whose cache record is
// current (same WAV mtime and feature-config fingerprint). Unreadable or
// corrupt WAVs are listed in the report and skipped. Statistics over all
// cached features land in <cache_dir>/stats.json.
PrepareReport prepare_features(const Manifest& m, const std::string& cache_dir,
                               const dsp::SpectrogramConfig& cfg,
                               uint64_t fingerprint);

FeatureStats load_feature_stats(const std::string& cache_dir);

// Reads one cached Mel matrix (frames x num_mels) by cache key.
Eigen::MatrixXf load_cached_mel(const std::string& cache_dir,
                                const std::string& cache_key);

}  // namespace mtevc::pipeline
