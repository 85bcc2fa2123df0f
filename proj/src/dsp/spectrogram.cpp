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

#include "mtevc/dsp/spectrogram.hpp"

#include <cmath>

#include "mtevc/error.hpp"

namespace mtevc::dsp {

namespace {

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

std::vector<double> hann_window(int n) {
  // Periodic Hann.
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i)
    w[i] = 0.5 * (1.0 - std::cos(2.0 * M_PI * i / n));
  return w;
}

// Slaney Mel scale: linear below 1 kHz, logarithmic above.
double hz_to_mel(double hz) {
  constexpr double kBreak = 1000.0;
  constexpr double kLinStep = 200.0 / 3.0;
  if (hz < kBreak) return hz / kLinStep;
  const double log_step = std::log(6.4) / 27.0;
  return kBreak / kLinStep + std::log(hz / kBreak) / log_step;
}

double mel_to_hz(double mel) {
  constexpr double kBreak = 1000.0;
  constexpr double kLinStep = 200.0 / 3.0;
  const double break_mel = kBreak / kLinStep;
  if (mel < break_mel) return mel * kLinStep;
  const double log_step = std::log(6.4) / 27.0;
  return kBreak * std::exp(log_step * (mel - break_mel));
}

std::vector<double> band_edges_hz(const SpectrogramConfig& cfg) {
  std::vector<double> edges(cfg.num_mels + 2);
  double mel_lo = hz_to_mel(cfg.fmin_hz);
  double mel_hi = hz_to_mel(cfg.fmax_hz);
  for (int i = 0; i < cfg.num_mels + 2; ++i)
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (cfg.num_mels + 1));
  return edges;
}

}  // namespace

void SpectrogramConfig::validate(int sample_rate_hz) const {
  if (!is_pow2(fft_size))
    throw InvalidInput("fft_size=" + std::to_string(fft_size) +
                       " must be a power of two");
  if (win_length <= 0 || win_length > fft_size)
    throw InvalidInput("win_length=" + std::to_string(win_length) +
                       " must be in (0, fft_size]");
  if (hop_length <= 0 || hop_length > win_length)
    throw InvalidInput("hop_length=" + std::to_string(hop_length) +
                       " must be in (0, win_length]");
  if (num_mels < 1)
    throw InvalidInput("num_mels=" + std::to_string(num_mels) + " must be >= 1");
  if (fmin_hz < 0 || fmin_hz >= fmax_hz || fmax_hz > sample_rate_hz / 2.0)
    throw InvalidInput("mel band range [" + std::to_string(fmin_hz) + ", " +
                       std::to_string(fmax_hz) +
                       "] must satisfy 0 <= fmin < fmax <= sample_rate/2");
  if (log_floor <= 0)
    throw InvalidInput("log_floor must be positive");
}

void fft(std::vector<std::complex<double>>& a, bool inverse) {
  const size_t n = a.size();
  if (!is_pow2(static_cast<int>(n)))
    throw InvalidInput("fft size must be a power of two");
  // Bit-reversal permutation.
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    double ang = 2.0 * M_PI / static_cast<double>(len) * (inverse ? 1 : -1);
    std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t j = 0; j < len / 2; ++j) {
        std::complex<double> u = a[i + j];
        std::complex<double> v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wl;
      }
    }
  }
  if (inverse) {
    for (auto& x : a) x /= static_cast<double>(n);
  }
}

Eigen::MatrixXcd stft(const Waveform& w, const SpectrogramConfig& cfg) {
  if (w.samples.empty()) throw InvalidInput("stft: empty waveform");
  cfg.validate(w.sample_rate_hz);

  const long len = static_cast<long>(w.samples.size());
  const long frames = len / cfg.hop_length + 1;
  const int pad = cfg.fft_size / 2;
  const int bins = cfg.bins();
  const auto window = hann_window(cfg.win_length);
  // The window is centered within the fft buffer.
  const int win_off = (cfg.fft_size - cfg.win_length) / 2;

  Eigen::MatrixXcd out(frames, bins);
  std::vector<std::complex<double>> buf(cfg.fft_size);
  for (long f = 0; f < frames; ++f) {
    const long start = f * cfg.hop_length - pad;
    std::fill(buf.begin(), buf.end(), std::complex<double>(0.0, 0.0));
    for (int i = 0; i < cfg.win_length; ++i) {
      const long t = start + win_off + i;
      if (t >= 0 && t < len)
        buf[win_off + i] = window[i] * static_cast<double>(w.samples[t]);
    }
    fft(buf, false);
    for (int k = 0; k < bins; ++k) out(f, k) = buf[k];
  }
  return out;
}

Waveform istft(const Eigen::MatrixXcd& spec, const SpectrogramConfig& cfg,
               long num_samples, int sample_rate_hz) {
  const long frames = spec.rows();
  const int pad = cfg.fft_size / 2;
  const auto window = hann_window(cfg.win_length);
  const int win_off = (cfg.fft_size - cfg.win_length) / 2;
  const long padded_len = (frames - 1) * cfg.hop_length + cfg.fft_size;

  std::vector<double> acc(padded_len, 0.0);
  std::vector<double> norm(padded_len, 0.0);
  std::vector<std::complex<double>> buf(cfg.fft_size);
  for (long f = 0; f < frames; ++f) {
    for (int k = 0; k < cfg.fft_size; ++k) {
      if (k <= cfg.fft_size / 2)
        buf[k] = spec(f, k);
      else
        buf[k] = std::conj(spec(f, cfg.fft_size - k));
    }
    fft(buf, true);
    const long base = f * cfg.hop_length;
    for (int i = 0; i < cfg.win_length; ++i) {
      acc[base + win_off + i] += window[i] * buf[win_off + i].real();
      norm[base + win_off + i] += window[i] * window[i];
    }
  }

  Waveform out;
  out.sample_rate_hz = sample_rate_hz;
  out.samples.resize(num_samples, 0.0f);
  for (long t = 0; t < num_samples; ++t) {
    const long idx = t + pad;  // undo the center padding
    if (idx < padded_len && norm[idx] > 1e-10)
      out.samples[t] = static_cast<float>(acc[idx] / norm[idx]);
  }
  return out;
}

Eigen::MatrixXd mel_filterbank(const SpectrogramConfig& cfg,
                               int sample_rate_hz) {
  const int bins = cfg.bins();
  const auto edges = band_edges_hz(cfg);
  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(cfg.num_mels, bins);
  for (int m = 0; m < cfg.num_mels; ++m) {
    const double lo = edges[m], center = edges[m + 1], hi = edges[m + 2];
    const double area_norm = 2.0 / (hi - lo);  // Slaney normalization
    for (int k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate_hz / cfg.fft_size;
      double v = 0.0;
      if (f > lo && f < center)
        v = (f - lo) / (center - lo);
      else if (f >= center && f < hi)
        v = (hi - f) / (hi - center);
      fb(m, k) = v * area_norm;
    }
    if (fb.row(m).maxCoeff() <= 0.0) {
      // Make sure a very narrow triangle still sees its nearest bin.
      int k = static_cast<int>(std::lround(center * cfg.fft_size / sample_rate_hz));
      k = std::clamp(k, 0, bins - 1);
      fb(m, k) = area_norm;
    }
  }
  return fb;
}

std::vector<double> mel_band_centers_hz(const SpectrogramConfig& cfg,
                                        int /*sample_rate_hz*/) {
  const auto edges = band_edges_hz(cfg);
  std::vector<double> centers(cfg.num_mels);
  for (int m = 0; m < cfg.num_mels; ++m) centers[m] = edges[m + 1];
  return centers;
}

MelSpectrogram mel_spectrogram(const Waveform& w,
                               const SpectrogramConfig& cfg) {
  Eigen::MatrixXcd spec = stft(w, cfg);
  Eigen::MatrixXd mag = spec.cwiseAbs();
  Eigen::MatrixXd fb = mel_filterbank(cfg, w.sample_rate_hz);
  Eigen::MatrixXd mel = mag * fb.transpose();  // frames x num_mels
  MelSpectrogram out;
  out.config = cfg;
  out.values = mel.cwiseMax(cfg.log_floor).array().log().matrix();
  return out;
}

Eigen::MatrixXd dct_matrix(int n) {
  Eigen::MatrixXd d(n, n);
  const double s0 = std::sqrt(1.0 / n);
  const double s = std::sqrt(2.0 / n);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      d(k, i) = (k == 0 ? s0 : s) * std::cos(M_PI * k * (2 * i + 1) / (2.0 * n));
  return d;
}

MelCepstrum mel_cepstrum(const MelSpectrogram& m, int order) {
  const int n = static_cast<int>(m.values.cols());
  if (order < 1 || order > n - 1)
    throw InvalidInput("mel_cepstrum: order=" + std::to_string(order) +
                       " must be in [1, num_mels-1]");
  Eigen::MatrixXd d = dct_matrix(n);
  Eigen::MatrixXd all = m.values * d.transpose();  // frames x n
  MelCepstrum out;
  out.order = order;
  out.values = all.middleCols(1, order);
  return out;
}

double spectral_convergence(const Waveform& w,
                            const Eigen::MatrixXd& target_magnitude,
                            const SpectrogramConfig& cfg) {
  Eigen::MatrixXd mag = stft(w, cfg).cwiseAbs();
  const long frames = std::min(mag.rows(), target_magnitude.rows());
  double num = (mag.topRows(frames) - target_magnitude.topRows(frames)).norm();
  double den = target_magnitude.topRows(frames).norm();
  if (den < 1e-12) return num;
  return num / den;
}

Waveform griffin_lim_linear(const Eigen::MatrixXd& magnitude,
                            const SpectrogramConfig& cfg, int iters,
                            long num_samples, int sample_rate_hz) {
  if (iters < 1) throw InvalidInput("griffin_lim: iters must be >= 1");
  const long frames = magnitude.rows();
  // Zero-phase start keeps the whole reconstruction deterministic. Each
  // round projects onto consistent spectrograms (istft then stft), restores
  // the target magnitudes, and extrapolates along the update direction,
  // which converges much faster than the plain alternating projection.
  const double momentum = 0.99;
  Eigen::MatrixXcd spec = magnitude.cast<std::complex<double>>();
  Eigen::MatrixXcd proj = spec, prev;
  for (int it = 0; it < iters; ++it) {
    Waveform w = istft(spec, cfg, num_samples, sample_rate_hz);
    Eigen::MatrixXcd est = stft(w, cfg);
    prev.swap(proj);
    proj.resize(frames, magnitude.cols());
    for (long f = 0; f < frames; ++f) {
      for (int k = 0; k < magnitude.cols(); ++k) {
        std::complex<double> v = est(f, k);
        double a = std::abs(v);
        proj(f, k) = a > 1e-12 ? magnitude(f, k) * v / a
                               : std::complex<double>(magnitude(f, k), 0.0);
      }
    }
    spec = it == 0 ? proj : (proj + momentum * (proj - prev)).eval();
  }
  // The projected estimate carries the exact target magnitudes.
  return istft(proj, cfg, num_samples, sample_rate_hz);
}

Waveform griffin_lim(const MelSpectrogram& m, int iters, int sample_rate_hz) {
  if (iters < 1) throw InvalidInput("griffin_lim: iters must be >= 1");
  Eigen::MatrixXd fb = mel_filterbank(m.config, sample_rate_hz);
  Eigen::MatrixXd pinv =
      fb.completeOrthogonalDecomposition().pseudoInverse();  // bins x mels
  Eigen::MatrixXd energies = m.values.array().exp().matrix();
  Eigen::MatrixXd magnitude = (energies * pinv.transpose()).cwiseMax(0.0);
  // frames * hop matches the neural vocoders' output-length contract.
  const long num_samples = m.frames() * m.config.hop_length;
  return griffin_lim_linear(magnitude, m.config, iters, num_samples,
                            sample_rate_hz);
}

}  // namespace mtevc::dsp
