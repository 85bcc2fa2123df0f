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

#include "mtevc/pipeline/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "mtevc/dsp/waveform.hpp"
#include "mtevc/error.hpp"

namespace mtevc::pipeline {

namespace fs = std::filesystem;

namespace {

uint64_t file_mtime(const std::string& path) {
  return static_cast<uint64_t>(
      fs::last_write_time(path).time_since_epoch().count());
}

std::string fingerprint_hex(uint64_t fp) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fp));
  return buf;
}

}  // namespace

void write_feature_file(const std::string& path, const char magic[4],
                        const Eigen::MatrixXf& values) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open feature file '" + path + "'");
  os.write(magic, 4);
  uint32_t rows = static_cast<uint32_t>(values.rows());
  uint32_t cols = static_cast<uint32_t>(values.cols());
  os.write(reinterpret_cast<const char*>(&rows), 4);
  os.write(reinterpret_cast<const char*>(&cols), 4);
  for (long r = 0; r < values.rows(); ++r)
    for (long c = 0; c < values.cols(); ++c) {
      float v = values(r, c);
      os.write(reinterpret_cast<const char*>(&v), 4);
    }
  if (!os) throw IoError("write failed for feature file '" + path + "'");
}

Eigen::MatrixXf read_feature_file(const std::string& path,
                                  const char magic[4]) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open feature file '" + path + "'");
  char got[4];
  is.read(got, 4);
  if (!is || std::memcmp(got, magic, 4) != 0)
    throw DataError("'" + path + "' is not a " +
                    std::string(magic, magic + 4) + " feature file");
  uint32_t rows = 0, cols = 0;
  is.read(reinterpret_cast<char*>(&rows), 4);
  is.read(reinterpret_cast<char*>(&cols), 4);
  if (!is || rows > (1u << 24) || cols > (1u << 24))
    throw DataError("feature file '" + path + "' has a corrupt header");
  Eigen::MatrixXf values(rows, cols);
  for (uint32_t r = 0; r < rows; ++r)
    for (uint32_t c = 0; c < cols; ++c) {
      float v;
      is.read(reinterpret_cast<char*>(&v), 4);
      if (!is) throw DataError("feature file '" + path + "' is truncated");
      values(r, c) = v;
    }
  return values;
}

PrepareReport prepare_features(const Manifest& m, const std::string& cache_dir,
                               const dsp::SpectrogramConfig& cfg,
                               uint64_t fingerprint) {
  std::error_code ec;
  fs::create_directories(cache_dir, ec);
  if (ec) throw IoError("cannot create cache directory '" + cache_dir + "'");

  const std::string index_path = (fs::path(cache_dir) / "index.json").string();
  nlohmann::json index;
  index["fingerprint"] = fingerprint_hex(fingerprint);
  index["entries"] = nlohmann::json::object();
  bool index_valid = false;
  if (fs::exists(index_path)) {
    try {
      std::ifstream is(index_path);
      nlohmann::json old;
      is >> old;
      if (old.value("fingerprint", std::string()) ==
          fingerprint_hex(fingerprint)) {
        index["entries"] = old.value("entries", nlohmann::json::object());
        index_valid = true;
      }
    } catch (...) {
      index_valid = false;  // unreadable index: recompute everything
    }
  }

  PrepareReport report;
  for (const auto& e : m.entries) {
    const std::string key = e.cache_key();
    const std::string mel_path =
        (fs::path(cache_dir) / (key + ".melf")).string();
    uint64_t mtime = 0;
    try {
      mtime = file_mtime(e.wav_path);
    } catch (const fs::filesystem_error&) {
      report.failed.push_back(key + ": cannot stat '" + e.wav_path + "'");
      continue;
    }

    if (index_valid && fs::exists(mel_path)) {
      const auto& je = index["entries"];
      if (je.contains(key) && je[key].value("mtime", uint64_t(0)) == mtime) {
        ++report.cached;
        continue;
      }
    }

    try {
      dsp::Waveform w = dsp::read_wav(e.wav_path);
      dsp::MelSpectrogram mel = dsp::mel_spectrogram(w, cfg);
      write_feature_file(mel_path, kMelMagic, mel.values.cast<float>());
      index["entries"][key] = {{"mtime", mtime}};
      ++report.computed;
    } catch (const Error& ex) {
      report.failed.push_back(key + ": " + ex.what());
    }
  }

  // Statistics over every currently cached feature of this manifest.
  FeatureStats stats;
  stats.mean.assign(cfg.num_mels, 0.0);
  stats.stddev.assign(cfg.num_mels, 0.0);
  std::vector<double> sq(cfg.num_mels, 0.0);
  for (const auto& e : m.entries) {
    const std::string mel_path =
        (fs::path(cache_dir) / (e.cache_key() + ".melf")).string();
    if (!fs::exists(mel_path)) continue;
    Eigen::MatrixXf mel = read_feature_file(mel_path, kMelMagic);
    for (long r = 0; r < mel.rows(); ++r)
      for (long c = 0; c < mel.cols(); ++c) {
        double v = mel(r, c);
        stats.mean[c] += v;
        sq[c] += v * v;
      }
    stats.frames += mel.rows();
  }
  if (stats.frames > 0) {
    for (int c = 0; c < cfg.num_mels; ++c) {
      stats.mean[c] /= stats.frames;
      double var = sq[c] / stats.frames - stats.mean[c] * stats.mean[c];
      stats.stddev[c] = std::max(std::sqrt(std::max(var, 0.0)), 1e-6);
    }
    nlohmann::json js;
    js["num_mels"] = cfg.num_mels;
    js["frames"] = stats.frames;
    js["mean"] = stats.mean;
    js["stddev"] = stats.stddev;
    std::ofstream os((fs::path(cache_dir) / "stats.json").string());
    if (!os) throw IoError("cannot write feature statistics in '" +
                           cache_dir + "'");
    os << js.dump(2) << "\n";
  }

  std::ofstream os(index_path);
  if (!os) throw IoError("cannot write cache index '" + index_path + "'");
  os << index.dump(2) << "\n";
  return report;
}

FeatureStats load_feature_stats(const std::string& cache_dir) {
  const std::string path = (fs::path(cache_dir) / "stats.json").string();
  std::ifstream is(path);
  if (!is)
    throw DataError("no feature statistics in '" + cache_dir +
                    "' (run prepare first)");
  nlohmann::json j;
  try {
    is >> j;
    FeatureStats stats;
    stats.mean = j.at("mean").get<std::vector<double>>();
    stats.stddev = j.at("stddev").get<std::vector<double>>();
    stats.frames = j.at("frames").get<long>();
    if (stats.mean.size() != stats.stddev.size() || stats.mean.empty())
      throw DataError("feature statistics in '" + cache_dir +
                      "' are inconsistent");
    return stats;
  } catch (const nlohmann::json::exception& ex) {
    throw DataError("feature statistics '" + path + "': " + ex.what());
  }
}

Eigen::MatrixXf load_cached_mel(const std::string& cache_dir,
                                const std::string& cache_key) {
  const std::string path =
      (fs::path(cache_dir) / (cache_key + ".melf")).string();
  if (!fs::exists(path))
    throw DataError("no cached features for '" + cache_key +
                    "' (run prepare first)");
  return read_feature_file(path, kMelMagic);
}

}  // namespace mtevc::pipeline
