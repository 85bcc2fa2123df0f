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

#include <string>
#include <vector>

namespace mtevc::pipeline {

// One utterance recording. The same utterance_id appears once per
// (speaker, emotion) cell of a parallel corpus.
struct ManifestEntry {
  std::string utterance_id;
  std::string wav_path;
  int speaker_id = 0;
  int emotion_id = 0;
  std::string ppg_path;  // empty when the entry carries no PPG matrix
  std::string text;      // optional transcript

  // Stable feature-cache key, unique per (utterance, speaker, emotion).
  std::string cache_key() const {
    return utterance_id + "_s" + std::to_string(speaker_id) + "_e" +
           std::to_string(emotion_id);
  }
};

struct Manifest {
  std::vector<ManifestEntry> entries;
  std::vector<std::string> speakers;  // index is the dense speaker id
  std::vector<std::string> emotions;  // index is the dense emotion id

  // Throws DataError naming the offending entry: ids must be inside the
  // name tables and, when check_files is set, every referenced file must
  // exist on disk.
  void validate(bool check_files = true) const;
};

// Parses and validates a manifest. Relative file paths are resolved
// against the manifest's directory. Unreadable file -> IoError, malformed
// or invalid content -> DataError.
Manifest load_manifest(const std::string& path);

// Writes the manifest as JSON; paths are stored as given.
void save_manifest(const Manifest& m, const std::string& path);

}  // namespace mtevc::pipeline
