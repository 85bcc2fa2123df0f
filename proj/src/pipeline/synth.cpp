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

#include "mtevc/pipeline/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "mtevc/dsp/waveform.hpp"
#include "mtevc/error.hpp"
#include "mtevc/pipeline/features.hpp"
#include "mtevc/rng.hpp"

namespace mtevc::pipeline {

namespace fs = std::filesystem;

namespace {

constexpr int kHarmonics = 8;
constexpr double kBaseTilt = 0.45;      // log-amplitude slope per harmonic
constexpr double kMelodyOctaves = 0.25;  // melody span in octaves each way
constexpr double kVibratoDepth = 0.025;
constexpr double kAmplitude = 0.45;
constexpr int kMelodyPoints = 5;
constexpr int kEnergyPoints = 4;
constexpr int kPitchClasses = 16;
constexpr int kEnergyClasses = 8;
constexpr int kReservedClasses = 3;  // silence-like classes left unused

// Shared per-utterance content: a melody contour in [-1, 1] and an energy
// contour in (0, 1], both smooth functions of normalized time.
struct Content {
  double duration_s = 0.0;
  std::vector<double> melody;  // control points
  std::vector<double> energy;

  static double interp(const std::vector<double>& pts, double tau) {
    tau = std::clamp(tau, 0.0, 1.0);
    const double pos = tau * (pts.size() - 1);
    const size_t i = std::min(static_cast<size_t>(pos), pts.size() - 2);
    const double frac = pos - static_cast<double>(i);
    const double mu = 0.5 * (1.0 - std::cos(M_PI * frac));
    return pts[i] * (1.0 - mu) + pts[i + 1] * mu;
  }

  double melody_at(double tau) const { return interp(melody, tau); }
  // Full envelope: smooth per-utterance level times an edge fade.
  double energy_at(double tau) const {
    tau = std::clamp(tau, 0.0, 1.0);
    return interp(energy, tau) * std::pow(std::sin(M_PI * tau), 0.3);
  }
};

Content make_content(uint64_t seed, int utterance) {
  Rng rng(fnv1a64("content:" + std::to_string(seed) + ":" +
                  std::to_string(utterance)));
  Content c;
  c.duration_s = 0.0;  // set by caller from the spec's range
  c.melody.resize(kMelodyPoints);
  for (auto& v : c.melody) v = rng.uniform(-1.0, 1.0);
  c.energy.resize(kEnergyPoints);
  for (auto& v : c.energy) v = rng.uniform(0.55, 1.0);
  c.duration_s = rng.uniform(0.0, 1.0);  // scaled into the range later
  return c;
}

int ppg_class(const Content& c, double tau) {
  const double m = std::clamp((c.melody_at(tau) + 1.0) * 0.5, 0.0, 1.0);
  const double e = std::clamp(c.energy_at(tau), 0.0, 1.0);
  const int mclass =
      std::min(kPitchClasses - 1, static_cast<int>(m * kPitchClasses));
  const int eclass =
      std::min(kEnergyClasses - 1, static_cast<int>(e * kEnergyClasses));
  return kReservedClasses + mclass * kEnergyClasses + eclass;
}

Eigen::MatrixXf make_ppg(const Content& c, long num_samples, int hop,
                         int dim) {
  const long frames = num_samples / hop + 1;
  Eigen::MatrixXf ppg(frames, dim);
  for (long f = 0; f < frames; ++f) {
    const double tau =
        std::min(1.0, static_cast<double>(f * hop) / num_samples);
    const int cls = ppg_class(c, tau);
    std::vector<double> w(dim, 0.02 / dim);
    w[cls] += 0.90;
    if (cls > 0) w[cls - 1] += 0.04;
    if (cls + 1 < dim) w[cls + 1] += 0.04;
    double total = 0.0;
    for (double v : w) total += v;
    for (int d = 0; d < dim; ++d)
      ppg(f, d) = static_cast<float>(w[d] / total);
  }
  return ppg;
}

dsp::Waveform render(const SyntheticCorpusSpec& spec, const Content& c,
                     int speaker, int emotion, long num_samples) {
  dsp::Waveform w;
  w.sample_rate_hz = spec.sample_rate_hz;
  w.samples.resize(num_samples);

  const double base = spec.speaker_base_f0_hz[speaker];
  const double mult = spec.emotion_f0_multiplier[emotion];
  const double vib = spec.emotion_vibrato_hz[emotion];
  const double tilt = kBaseTilt + spec.emotion_tilt[emotion];

  double amp[kHarmonics];
  double amp_total = 0.0;
  for (int h = 0; h < kHarmonics; ++h) {
    amp[h] = std::exp(-tilt * h);
    amp_total += amp[h];
  }

  double phase = 0.0;
  for (long t = 0; t < num_samples; ++t) {
    const double tau = static_cast<double>(t) / num_samples;
    const double secs = static_cast<double>(t) / spec.sample_rate_hz;
    double f0 = base * mult * std::pow(2.0, kMelodyOctaves * c.melody_at(tau));
    f0 *= 1.0 + kVibratoDepth * std::sin(2.0 * M_PI * vib * secs);
    f0 = std::clamp(f0, 70.0, 380.0);
    phase += 2.0 * M_PI * f0 / spec.sample_rate_hz;
    double v = 0.0;
    for (int h = 0; h < kHarmonics; ++h)
      v += amp[h] * std::sin((h + 1) * phase);
    w.samples[t] =
        static_cast<float>(kAmplitude * c.energy_at(tau) * v / amp_total);
  }
  return w;
}

}  // namespace

void SyntheticCorpusSpec::validate() const {
  if (num_speakers <= 0 || num_emotions <= 0 || utterances_per_cell <= 0)
    throw InvalidInput("corpus spec: counts must be positive");
  if (min_duration_s <= 0.0 || max_duration_s < min_duration_s)
    throw InvalidInput("corpus spec: bad duration range");
  if (sample_rate_hz <= 0 || ppg_hop <= 0)
    throw InvalidInput("corpus spec: bad sample rate or hop");
  if (ppg_dim < kReservedClasses + kPitchClasses * kEnergyClasses)
    throw InvalidInput("corpus spec: ppg_dim must hold at least " +
                       std::to_string(kReservedClasses +
                                      kPitchClasses * kEnergyClasses) +
                       " classes");
  if (static_cast<int>(speaker_base_f0_hz.size()) < num_speakers)
    throw InvalidInput("corpus spec: speaker_base_f0_hz shorter than "
                       "num_speakers");
  const size_t ne = static_cast<size_t>(num_emotions);
  if (emotion_names.size() < ne || emotion_f0_multiplier.size() < ne ||
      emotion_vibrato_hz.size() < ne || emotion_tilt.size() < ne ||
      emotion_duration_factor.size() < ne)
    throw InvalidInput("corpus spec: emotion tables shorter than "
                       "num_emotions");
}

Manifest synth_dataset(const SyntheticCorpusSpec& spec,
                       const std::string& out_dir, uint64_t seed) {
  spec.validate();
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "wavs", ec);
  if (!ec) fs::create_directories(fs::path(out_dir) / "ppgs", ec);
  if (ec) throw IoError("cannot create corpus directory '" + out_dir + "'");

  Manifest m;
  for (int s = 0; s < spec.num_speakers; ++s)
    m.speakers.push_back("spk" + std::to_string(s));
  m.emotions.assign(spec.emotion_names.begin(),
                    spec.emotion_names.begin() + spec.num_emotions);

  char name[64];
  for (int u = 0; u < spec.utterances_per_cell; ++u) {
    Content c = make_content(seed, u);
    const double base_dur =
        spec.min_duration_s +
        (spec.max_duration_s - spec.min_duration_s) * c.duration_s;
    for (int s = 0; s < spec.num_speakers; ++s) {
      for (int e = 0; e < spec.num_emotions; ++e) {
        const double dur = base_dur * spec.emotion_duration_factor[e];
        const long n = std::max<long>(
            spec.ppg_hop * 4,
            static_cast<long>(std::lround(dur * spec.sample_rate_hz)));
        std::snprintf(name, sizeof(name), "s%d_e%d_u%03d", s, e, u);
        const std::string wav_rel = std::string("wavs/") + name + ".wav";
        const std::string ppg_rel = std::string("ppgs/") + name + ".ppgf";

        dsp::Waveform w = render(spec, c, s, e, n);
        dsp::write_wav((fs::path(out_dir) / wav_rel).string(), w);
        write_feature_file((fs::path(out_dir) / ppg_rel).string(), kPpgMagic,
                           make_ppg(c, n, spec.ppg_hop, spec.ppg_dim));

        ManifestEntry entry;
        std::snprintf(name, sizeof(name), "u%03d", u);
        entry.utterance_id = name;
        entry.wav_path = wav_rel;
        entry.speaker_id = s;
        entry.emotion_id = e;
        entry.ppg_path = ppg_rel;
        m.entries.push_back(std::move(entry));
      }
    }
  }

  const std::string manifest_path =
      (fs::path(out_dir) / "manifest.json").string();
  save_manifest(m, manifest_path);
  return load_manifest(manifest_path);
}

}  // namespace mtevc::pipeline
