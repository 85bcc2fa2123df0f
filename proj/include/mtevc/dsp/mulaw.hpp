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
#include <vector>

#include "mtevc/dsp/waveform.hpp"

namespace mtevc::dsp {

constexpr int kMuLawClasses = 256;
constexpr int kMuLawZeroClass = 128;  // class of a zero sample

// Companded value f(x) = sign(x) * ln(1 + 255|x|) / ln(256), in [-1, 1].
double mu_law_compand(double x);

// Inverse of mu_law_compand.
double mu_law_expand(double f);

// Class id in [0, classes) for one sample; |x| > 1 -> InvalidInput.
// Binning is floor of (f(x)+1)/2 * classes with a top clamp.
int mu_law_quantize(double x, int classes);

// Sample value at the companded-domain bin center of a class id.
double mu_law_dequantize(int cls, int classes);

// 256-class shorthands matching 8-bit mu-law.
int mu_law_encode_sample(double x);
double mu_law_decode_sample(int cls);

std::vector<uint8_t> mu_law_encode(const Waveform& w);
Waveform mu_law_decode(const std::vector<uint8_t>& classes,
                       int sample_rate_hz = 16000);

}  // namespace mtevc::dsp
