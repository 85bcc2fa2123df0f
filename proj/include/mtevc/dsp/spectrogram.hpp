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

#include <Eigen/Dense>
#include <complex>

#include "mtevc/dsp/waveform.hpp"

namespace mtevc::dsp {

struct SpectrogramConfig {
  int fft_size = 1024;    // power of two
  int win_length = 1024;  // Hann window, zero-padded to fft_size
  int hop_length = 256;   // 16 ms at 16 kHz; factors as 16 *16 for upsampling
  int num_mels = 80;
  double fmin_hz = 0.0;
  double fmax_hz = 8000.0;
  double log_floor = 1e-5;

  int bins() const { return fft_size / 2 + 1; }

  // Throws InvalidInput when a field is out of range.
  void validate(int sample_rate_hz) const;
};

// Log Mel-spectrogram, frames x num_mels, natural log of floored energies.
struct MelSpectrogram {
  Eigen::MatrixXd values;  // frames x num_mels
  SpectrogramConfig config;

  long frames() const { return values.rows(); }
};

// Mel-cepstral coefficients 1..order (energy coefficient 0 excluded).
struct MelCepstrum {
  Eigen::MatrixXd values;  // frames x order
  int order = 13;
};

// In-place iterative radix-2 FFT; data.size() must be a power of two.
void fft(std::vector<std::complex<double>>& data, bool inverse);

// Short-time Fourier transform with centered frames (the signal is
// zero-padded by fft_size/2 on both edges). Returns frames x (fft_size/2+1);
// frame count is floor(len / hop) + 1. A periodic Hann window of win_length
// is applied, zero-padded to fft_size.
Eigen::MatrixXcd stft(const Waveform& w, const SpectrogramConfig& cfg);

// Inverse STFT by overlap-add with squared-window normalization. Returns
// num_samples samples (the center-padding is trimmed).
Waveform istft(const Eigen::MatrixXcd& spec, const SpectrogramConfig& cfg,
               long num_samples, int sample_rate_hz);

// Slaney-style area-normalized triangular Mel filterbank, num_mels x bins.
Eigen::MatrixXd mel_filterbank(const SpectrogramConfig& cfg,
                               int sample_rate_hz);

// Center frequencies (Hz) of the filterbank triangles, one per Mel band.
std::vector<double> mel_band_centers_hz(const SpectrogramConfig& cfg,
                                        int sample_rate_hz);

// values = ln(max(filterbank * |STFT|, log_floor)).
MelSpectrogram mel_spectrogram(const Waveform& w, const SpectrogramConfig& cfg);

// Orthonormal DCT-II matrix, rows k = 0..n-1.
Eigen::MatrixXd dct_matrix(int n);

// DCT-II of each log-Mel frame, keeping coefficients 1..order.
MelCepstrum mel_cepstrum(const MelSpectrogram& m, int order);

// Phase reconstruction from a log-Mel spectrogram. The Mel matrix is
// inverted to linear magnitudes through the nonnegative-clamped
// pseudo-inverse of the filterbank, then Griffin-Lim iterations run from a
// zero-phase start.
Waveform griffin_lim(const MelSpectrogram& m, int iters, int sample_rate_hz);

// Relative spectral-convergence error ||(|STFT(w)| - target)||_F /
// ||target||_F, the functional Griffin-Lim drives down.
double spectral_convergence(const Waveform& w,
                            const Eigen::MatrixXd& target_magnitude,
                            const SpectrogramConfig& cfg);

// Griffin-Lim against a linear magnitude target (used internally and by the
// convergence tests).
Waveform griffin_lim_linear(const Eigen::MatrixXd& magnitude,
                            const SpectrogramConfig& cfg, int iters,
                            long num_samples, int sample_rate_hz);

}  // namespace mtevc::dsp
