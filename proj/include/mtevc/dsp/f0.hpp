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

#include <vector>

#include "mtevc/dsp/waveform.hpp"

namespace mtevc::dsp {

// Per-frame fundamental frequency. f0_hz > 0 exactly where voiced.
struct F0Contour {
  std::vector<double> f0_hz;
  std::vector<bool> voiced;

  size_t frames() const { return f0_hz.size(); }
};

// Normalized-autocorrelation pitch tracker over the 60-400 Hz lag range.
// Frames are 40 ms long, hopped by frame_hop samples; a trailing frame that
// does not fit is dropped. A frame is voiced when the autocorrelation peak
// exceeds 0.3 and the frame RMS exceeds 1e-4 of the utterance's peak RMS.
// The winning lag is refined by parabolic interpolation and then by a
// windowed-DFT magnitude search, which pins pure tones to well under 0.1 Hz.
F0Contour estimate_f0(const Waveform& w, int frame_hop);

}  // namespace mtevc::dsp
