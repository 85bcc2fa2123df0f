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

#include "mtevc/dsp/mulaw.hpp"

#include <cmath>
#include <string>

#include "mtevc/error.hpp"

namespace mtevc::dsp {

namespace {
constexpr double kMu = 255.0;
const double kLn1pMu = std::log(1.0 + kMu);
}  // namespace

double mu_law_compand(double x) {
  double s = x < 0 ? -1.0 : 1.0;
  return s * std::log1p(kMu * std::abs(x)) / kLn1pMu;
}

double mu_law_expand(double f) {
  double s = f < 0 ? -1.0 : 1.0;
  return s * (std::exp(std::abs(f) * kLn1pMu) - 1.0) / kMu;
}

int mu_law_quantize(double x, int classes) {
  if (std::abs(x) > 1.0 || !std::isfinite(x))
    throw InvalidInput("mu_law_encode: sample " + std::to_string(x) +
                       " outside [-1, 1]; normalize first");
  double f = mu_law_compand(x);
  int cls = static_cast<int>(std::floor((f + 1.0) / 2.0 * classes));
  return std::min(cls, classes - 1);
}

double mu_law_dequantize(int cls, int classes) {
  if (cls < 0 || cls >= classes)
    throw InvalidInput("mu_law_decode: class " + std::to_string(cls) +
                       " outside [0, " + std::to_string(classes) + ")");
  double center = (2.0 * cls + 1.0) / classes - 1.0;
  return mu_law_expand(center);
}

int mu_law_encode_sample(double x) { return mu_law_quantize(x, kMuLawClasses); }

double mu_law_decode_sample(int cls) {
  return mu_law_dequantize(cls, kMuLawClasses);
}

std::vector<uint8_t> mu_law_encode(const Waveform& w) {
  std::vector<uint8_t> out(w.samples.size());
  for (size_t i = 0; i < w.samples.size(); ++i)
    out[i] = static_cast<uint8_t>(mu_law_encode_sample(w.samples[i]));
  return out;
}

Waveform mu_law_decode(const std::vector<uint8_t>& classes,
                       int sample_rate_hz) {
  Waveform w;
  w.sample_rate_hz = sample_rate_hz;
  w.samples.resize(classes.size());
  for (size_t i = 0; i < classes.size(); ++i)
    w.samples[i] = static_cast<float>(mu_law_decode_sample(classes[i]));
  return w;
}

}  // namespace mtevc::dsp
