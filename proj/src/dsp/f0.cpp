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

#include "mtevc/dsp/f0.hpp"

#include <algorithm>
#include <cmath>

#include "mtevc/error.hpp"

namespace mtevc::dsp {

namespace {

constexpr double kFminHz = 60.0;
constexpr double kFmaxHz = 400.0;
constexpr double kVoicingThreshold = 0.3;
constexpr double kPeakRatio = 0.985;
constexpr double kSilenceRmsRatio = 1e-4;
constexpr double kFrameLengthS = 0.040;

double frame_rms(const float* x, int n) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += static_cast<double>(x[i]) * x[i];
  return std::sqrt(acc / n);
}

// Hann-windowed DFT magnitude of the frame at an arbitrary frequency.
double dft_magnitude(const float* x, int n, double freq_hz, int sample_rate) {
  double re = 0.0, im = 0.0;
  const double w = 2.0 * M_PI * freq_hz / sample_rate;
  for (int i = 0; i < n; ++i) {
    const double win = 0.5 * (1.0 - std::cos(2.0 * M_PI * i / (n - 1)));
    const double v = win * x[i];
    re += v * std::cos(w * i);
    im -= v * std::sin(w * i);
  }
  return std::hypot(re, im);
}

// Ternary search for the spectral peak near f0_guess. The windowed magnitude
// is unimodal within +-half a DFT bin of a clean partial.
double refine_by_spectrum(const float* x, int n, double f0_guess,
                          int sample_rate) {
  const double half_bin = static_cast<double>(sample_rate) / n;
  double lo = std::max(kFminHz, f0_guess - half_bin);
  double hi = std::min(kFmaxHz, f0_guess + half_bin);
  for (int it = 0; it < 40; ++it) {
    const double m1 = lo + (hi - lo) / 3.0;
    const double m2 = hi - (hi - lo) / 3.0;
    if (dft_magnitude(x, n, m1, sample_rate) <
        dft_magnitude(x, n, m2, sample_rate))
      lo = m1;
    else
      hi = m2;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

F0Contour estimate_f0(const Waveform& w, int frame_hop) {
  if (w.samples.empty()) throw InvalidInput("estimate_f0: empty waveform");
  if (frame_hop <= 0) throw InvalidInput("estimate_f0: frame_hop must be > 0");

  const int sr = w.sample_rate_hz;
  const int frame_len = static_cast<int>(std::lround(kFrameLengthS * sr));
  const int lag_min = static_cast<int>(std::floor(sr / kFmaxHz));
  const int lag_max = static_cast<int>(std::ceil(sr / kFminHz));

  F0Contour out;
  const long n = static_cast<long>(w.samples.size());
  if (n < frame_len) return out;

  // Global RMS reference for the silence gate.
  double max_rms = 0.0;
  for (long start = 0; start + frame_len <= n; start += frame_hop)
    max_rms = std::max(max_rms, frame_rms(w.samples.data() + start, frame_len));

  std::vector<double> corr;
  for (long start = 0; start + frame_len <= n; start += frame_hop) {
    const float* x = w.samples.data() + start;
    double rms = frame_rms(x, frame_len);
    const int lag_hi = std::min(lag_max, frame_len - 2);
    double r_max = -1.0;
    corr.assign(lag_hi - lag_min + 1, -1.0);
    if (rms > kSilenceRmsRatio * max_rms) {
      for (int lag = lag_min; lag <= lag_hi; ++lag) {
        const int m = frame_len - lag;
        double num = 0.0, e0 = 0.0, e1 = 0.0;
        for (int i = 0; i < m; ++i) {
          const double a = x[i], b = x[i + lag];
          num += a * b;
          e0 += a * a;
          e1 += b * b;
        }
        const double den = std::sqrt(e0 * e1);
        const double r = den > 1e-20 ? num / den : 0.0;
        corr[lag - lag_min] = r;
        r_max = std::max(r_max, r);
      }
    }

    if (r_max > kVoicingThreshold) {
      // The global maximum can sit at a lag several periods out when that
      // multiple rounds closer to an integer. Take the shortest local
      // maximum that comes close to the best score instead.
      int best_lag = 0;
      for (int lag = lag_min; lag <= lag_hi && best_lag == 0; ++lag) {
        const double r = corr[lag - lag_min];
        if (r < kPeakRatio * r_max) continue;
        const double left = lag > lag_min ? corr[lag - lag_min - 1] : -1.0;
        const double right = lag < lag_hi ? corr[lag - lag_min + 1] : -1.0;
        if (r >= left && r >= right) best_lag = lag;
      }
      double lag = best_lag;
      if (best_lag > lag_min && best_lag < lag_hi) {
        const double rm = corr[best_lag - lag_min - 1];
        const double r0 = corr[best_lag - lag_min];
        const double rp = corr[best_lag - lag_min + 1];
        const double denom = rm - 2.0 * r0 + rp;
        if (std::abs(denom) > 1e-12) {
          double delta = 0.5 * (rm - rp) / denom;
          lag += std::clamp(delta, -0.5, 0.5);
        }
      }
      double f0 = std::clamp(static_cast<double>(sr) / lag, kFminHz, kFmaxHz);
      f0 = refine_by_spectrum(x, frame_len, f0, sr);
      out.f0_hz.push_back(f0);
      out.voiced.push_back(true);
    } else {
      out.f0_hz.push_back(0.0);
      out.voiced.push_back(false);
    }
  }
  return out;
}

}  // namespace mtevc::dsp
