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

#include "mtevc/pipeline/manifest.hpp"

#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "mtevc/error.hpp"

namespace mtevc::pipeline {

namespace fs = std::filesystem;

namespace {

std::string entry_tag(const ManifestEntry& e, size_t index) {
  return "entry '" + e.utterance_id + "' (#" + std::to_string(index) + ")";
}

}  // namespace

void Manifest::validate(bool check_files) const {
  if (speakers.empty()) throw DataError("manifest: empty speaker table");
  if (emotions.empty()) throw DataError("manifest: empty emotion table");
  for (size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (e.utterance_id.empty())
      throw DataError("manifest: entry #" + std::to_string(i) +
                      " has an empty utterance_id");
    if (e.speaker_id < 0 ||
        e.speaker_id >= static_cast<int>(speakers.size()))
      throw DataError("manifest: " + entry_tag(e, i) + ": speaker_id " +
                      std::to_string(e.speaker_id) + " outside [0, " +
                      std::to_string(speakers.size()) + ")");
    if (e.emotion_id < 0 ||
        e.emotion_id >= static_cast<int>(emotions.size()))
      throw DataError("manifest: " + entry_tag(e, i) + ": emotion_id " +
                      std::to_string(e.emotion_id) + " outside [0, " +
                      std::to_string(emotions.size()) + ")");
    if (check_files) {
      if (!fs::exists(e.wav_path))
        throw DataError("manifest: " + entry_tag(e, i) +
                        ": missing WAV file '" + e.wav_path + "'");
      if (!e.ppg_path.empty() && !fs::exists(e.ppg_path))
        throw DataError("manifest: " + entry_tag(e, i) +
                        ": missing PPG file '" + e.ppg_path + "'");
    }
  }
}

Manifest load_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open manifest '" + path + "'");
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw DataError("manifest '" + path + "': " + ex.what());
  }

  Manifest m;
  const fs::path base = fs::path(path).parent_path();
  auto resolve = [&base](const std::string& p) {
    if (p.empty() || fs::path(p).is_absolute()) return p;
    return (base / p).string();
  };

  try {
    m.speakers = j.at("speakers").get<std::vector<std::string>>();
    m.emotions = j.at("emotions").get<std::vector<std::string>>();
    for (const auto& je : j.at("entries")) {
      ManifestEntry e;
      e.utterance_id = je.at("utterance_id").get<std::string>();
      e.wav_path = resolve(je.at("wav_path").get<std::string>());
      e.speaker_id = je.at("speaker_id").get<int>();
      e.emotion_id = je.at("emotion_id").get<int>();
      e.ppg_path = resolve(je.value("ppg_path", std::string()));
      e.text = je.value("text", std::string());
      m.entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw DataError("manifest '" + path + "': " + ex.what());
  }
  m.validate();
  return m;
}

void save_manifest(const Manifest& m, const std::string& path) {
  nlohmann::json j;
  j["speakers"] = m.speakers;
  j["emotions"] = m.emotions;
  j["entries"] = nlohmann::json::array();
  for (const auto& e : m.entries) {
    nlohmann::json je;
    je["utterance_id"] = e.utterance_id;
    je["wav_path"] = e.wav_path;
    je["speaker_id"] = e.speaker_id;
    je["emotion_id"] = e.emotion_id;
    if (!e.ppg_path.empty()) je["ppg_path"] = e.ppg_path;
    if (!e.text.empty()) je["text"] = e.text;
    j["entries"].push_back(std::move(je));
  }
  std::ofstream os(path);
  if (!os) throw IoError("cannot write manifest '" + path + "'");
  os << j.dump(2) << "\n";
  if (!os) throw IoError("write failed for manifest '" + path + "'");
}

}  // namespace mtevc::pipeline
