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

#include "mtevc/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "mtevc/dsp/dtw.hpp"
#include "mtevc/dsp/f0.hpp"
#include "mtevc/error.hpp"

namespace mtevc::eval {

namespace {

constexpr double kMcdScale = 10.0 / 2.302585092994046;  // 10 / ln 10

double path_mean_mcd(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                     const dsp::DtwPath& path) {
  double acc = 0.0;
  for (auto [i, j] : path.pairs)
    acc += kMcdScale * std::sqrt(2.0 * (a.row(i) - b.row(j)).squaredNorm());
  return acc / static_cast<double>(path.pairs.size());
}

}  // namespace

double mcd_from_cepstra(const dsp::MelCepstrum& converted,
                        const dsp::MelCepstrum& target) {
  if (converted.values.rows() == 0 || target.values.rows() == 0)
    throw InvalidInput("mcd: empty cepstral sequence");
  if (converted.values.cols() != target.values.cols())
    throw InvalidInput("mcd: cepstral orders differ");
  auto path = dsp::dtw_align(converted.values, target.values);
  return path_mean_mcd(converted.values, target.values, path);
}

UtteranceMetrics compare_waveforms(const dsp::Waveform& converted,
                                   const dsp::Waveform& target,
                                   const dsp::SpectrogramConfig& cfg) {
  if (converted.samples.empty() || target.samples.empty())
    throw InvalidInput("compare_waveforms: empty waveform");
  if (converted.sample_rate_hz != target.sample_rate_hz)
    throw InvalidInput("compare_waveforms: sample rates differ");

  auto cep_c = dsp::mel_cepstrum(dsp::mel_spectrogram(converted, cfg), 13);
  auto cep_t = dsp::mel_cepstrum(dsp::mel_spectrogram(target, cfg), 13);
  auto path = dsp::dtw_align(cep_c.values, cep_t.values);

  UtteranceMetrics m;
  m.mcd_db = path_mean_mcd(cep_c.values, cep_t.values, path);

  auto f0_c = dsp::estimate_f0(converted, cfg.hop_length);
  auto f0_t = dsp::estimate_f0(target, cfg.hop_length);
  double acc = 0.0;
  for (auto [i, j] : path.pairs) {
    if (i >= static_cast<long>(f0_c.frames()) ||
        j >= static_cast<long>(f0_t.frames()))
      continue;  // pitch frames end earlier than centered spectral frames
    if (!f0_c.voiced[i] || !f0_t.voiced[j]) continue;
    double d = std::log(f0_t.f0_hz[j]) - std::log(f0_c.f0_hz[i]);
    acc += d * d;
    ++m.voiced_overlap;
  }
  if (m.voiced_overlap > 0) {
    m.logf0_defined = true;
    m.logf0_mse = acc / static_cast<double>(m.voiced_overlap);
  }
  return m;
}

double mcd(const dsp::Waveform& converted, const dsp::Waveform& target) {
  return compare_waveforms(converted, target).mcd_db;
}

double logf0_mse(const dsp::Waveform& converted, const dsp::Waveform& target) {
  return compare_waveforms(converted, target).logf0_mse;
}

EvalReport evaluate_pairs(const std::vector<EvalPair>& pairs,
                          const dsp::SpectrogramConfig& cfg) {
  EvalReport report;
  struct Acc {
    double mcd = 0.0;
    double lf0 = 0.0;
    long n = 0;
    long n_lf0 = 0;
    long n_undef = 0;
  };
  std::map<std::string, Acc> by_emotion;

  for (const auto& p : pairs) {
    dsp::Waveform c, t;
    try {
      c = dsp::read_wav(p.converted_path);
    } catch (const Error&) {
      report.missing.push_back(p.converted_path);
      continue;
    }
    try {
      t = dsp::read_wav(p.target_path);
    } catch (const Error&) {
      report.missing.push_back(p.target_path);
      continue;
    }
    UtteranceMetrics m = compare_waveforms(c, t, cfg);
    report.utterances.push_back({p.id, p.emotion, m});
    auto& a = by_emotion[p.emotion];
    a.mcd += m.mcd_db;
    ++a.n;
    if (m.logf0_defined) {
      a.lf0 += m.logf0_mse;
      ++a.n_lf0;
    } else {
      ++a.n_undef;
    }
  }

  for (const auto& [emotion, a] : by_emotion) {
    EmotionAggregate agg;
    agg.n_utts = a.n;
    agg.n_undefined = a.n_undef;
    agg.mcd_db = a.n > 0 ? a.mcd / a.n : 0.0;
    agg.logf0_mse = a.n_lf0 > 0 ? a.lf0 / a.n_lf0
                                : std::numeric_limits<double>::quiet_NaN();
    report.per_emotion[emotion] = agg;
  }
  return report;
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["emotions"] = nlohmann::json::object();
  for (const auto& [emotion, a] : per_emotion) {
    nlohmann::json e;
    e["mcd_db"] = a.mcd_db;
    if (std::isnan(a.logf0_mse))
      e["logf0_mse"] = nullptr;
    else
      e["logf0_mse"] = a.logf0_mse;
    e["n_utts"] = a.n_utts;
    e["n_undefined"] = a.n_undefined;
    j["emotions"][emotion] = e;
  }
  j["utterances"] = nlohmann::json::array();
  for (const auto& row : utterances) {
    nlohmann::json u;
    u["id"] = row.id;
    u["emotion"] = row.emotion;
    u["mcd_db"] = row.metrics.mcd_db;
    if (row.metrics.logf0_defined)
      u["logf0_mse"] = row.metrics.logf0_mse;
    else
      u["logf0_mse"] = nullptr;
    u["voiced_overlap"] = row.metrics.voiced_overlap;
    j["utterances"].push_back(u);
  }
  j["missing"] = missing;
  return j.dump(2);
}

std::string EvalReport::to_table() const {
  std::ostringstream out;
  out << "emotion        mcd_db    logf0_mse    n_utts  n_undefined\n";
  out << "-------------------------------------------------------\n";
  char line[128];
  for (const auto& [emotion, a] : per_emotion) {
    if (std::isnan(a.logf0_mse))
      std::snprintf(line, sizeof(line), "%-12s %8.4f %12s %9ld %12ld\n",
                    emotion.c_str(), a.mcd_db, "undefined", a.n_utts,
                    a.n_undefined);
    else
      std::snprintf(line, sizeof(line), "%-12s %8.4f %12.4f %9ld %12ld\n",
                    emotion.c_str(), a.mcd_db, a.logf0_mse, a.n_utts,
                    a.n_undefined);
    out << line;
  }
  if (!missing.empty()) {
    out << "missing files (excluded):\n";
    for (const auto& p : missing) out << "  " << p << "\n";
  }
  return out.str();
}

}  // namespace mtevc::eval
