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
#include <vector>

namespace mtevc::dsp {

// Mono PCM audio. Samples are dimensionless amplitudes in [-1, 1].
struct Waveform {
  std::vector<float> samples;
  int sample_rate_hz = 16000;

  size_t size() const { return samples.size(); }
  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate_hz;
  }
};

// Reads a RIFF WAV file. Only 16-bit signed PCM, mono, little-endian is
// accepted; anything else is rejected with a diagnostic naming the field.
Waveform read_wav(const std::string& path);

// Writes 16-bit PCM mono. Samples are clamped to [-1, 1].
void write_wav(const std::string& path, const Waveform& w);

}  // namespace mtevc::dsp
