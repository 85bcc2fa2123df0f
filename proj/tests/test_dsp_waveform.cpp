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

#include <cstdint>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "mtevc/dsp/waveform.hpp"
#include "mtevc/error.hpp"
#include "oracles.hpp"

using namespace mtevc;
using namespace mtevc::dsp;

namespace {

std::filesystem::path temp_wav(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

void put_u16(std::ofstream& f, uint16_t v) {
  char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
  f.write(b, 2);
}

void put_u32(std::ofstream& f, uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
               static_cast<char>((v >> 16) & 0xff),
               static_cast<char>((v >> 24) & 0xff)};
  f.write(b, 4);
}

// Hand-built WAV with configurable format fields and an extra skippable
// chunk before the data.
void write_custom_wav(const std::filesystem::path& p, uint16_t format,
                      uint16_t channels, uint32_t rate, uint16_t bits,
                      int n_samples) {
  std::ofstream f(p, std::ios::binary);
  uint32_t data_size = static_cast<uint32_t>(n_samples * channels * bits / 8);
  f.write("RIFF", 4);
  put_u32(f, 4 + 24 + 12 + 8 + data_size);
  f.write("WAVE", 4);
  f.write("fmt ", 4);
  put_u32(f, 16);
  put_u16(f, format);
  put_u16(f, channels);
  put_u32(f, rate);
  put_u32(f, rate * channels * bits / 8);
  put_u16(f, static_cast<uint16_t>(channels * bits / 8));
  put_u16(f, bits);
  f.write("LIST", 4);  // chunk readers must skip
  put_u32(f, 4);
  f.write("INFO", 4);
  f.write("data", 4);
  put_u32(f, data_size);
  for (uint32_t i = 0; i < data_size; ++i) f.put(0);
}

}  // namespace

TEST_SUITE_BEGIN("dsp");

TEST_CASE("wav write/read round-trips within 16-bit quantization") {
  auto path = temp_wav("mtevc_roundtrip.wav");
  Waveform w = oracles::tone(220.0, 0.05, 3);
  write_wav(path.string(), w);
  Waveform back = read_wav(path.string());
  REQUIRE(back.samples.size() == w.samples.size());
  CHECK(back.sample_rate_hz == 16000);
  for (size_t i = 0; i < w.samples.size(); ++i)
    CHECK(std::abs(back.samples[i] - w.samples[i]) <= 1.0f / 32768.0f);
  std::filesystem::remove(path);
}

TEST_CASE("unknown chunks before data are skipped") {
  auto path = temp_wav("mtevc_chunks.wav");
  write_custom_wav(path, 1, 1, 16000, 16, 100);
  Waveform w = read_wav(path.string());
  CHECK(w.samples.size() == 100);
  std::filesystem::remove(path);
}

TEST_CASE("rejection diagnostics name the offending field") {
  auto path = temp_wav("mtevc_bad.wav");

  write_custom_wav(path, 1, 2, 16000, 16, 10);
  CHECK_THROWS_WITH_AS(read_wav(path.string()),
                       doctest::Contains("channels=2"), InvalidInput);

  write_custom_wav(path, 3, 1, 16000, 16, 10);
  CHECK_THROWS_WITH_AS(read_wav(path.string()),
                       doctest::Contains("audio_format=3"), InvalidInput);

  write_custom_wav(path, 1, 1, 16000, 8, 10);
  CHECK_THROWS_WITH_AS(read_wav(path.string()),
                       doctest::Contains("bits_per_sample=8"), InvalidInput);

  write_custom_wav(path, 1, 1, 44100, 16, 10);
  CHECK_THROWS_WITH_AS(read_wav(path.string()),
                       doctest::Contains("sample_rate=44100"), InvalidInput);
  std::filesystem::remove(path);
}

TEST_CASE("missing files and non-wav content are rejected") {
  CHECK_THROWS_AS(read_wav("/nonexistent/file.wav"), IoError);
  auto path = temp_wav("mtevc_notwav.bin");
  {
    std::ofstream f(path, std::ios::binary);
    f << "definitely not audio";
  }
  CHECK_THROWS_AS(read_wav(path.string()), InvalidInput);
  std::filesystem::remove(path);
}

TEST_CASE("write clamps out-of-range samples") {
  auto path = temp_wav("mtevc_clamp.wav");
  Waveform w;
  w.samples = {2.0f, -2.0f, 0.5f};
  write_wav(path.string(), w);
  Waveform back = read_wav(path.string());
  CHECK(back.samples[0] == doctest::Approx(32767.0 / 32768.0));
  CHECK(back.samples[1] == doctest::Approx(-32767.0 / 32768.0));
  CHECK(back.samples[2] == doctest::Approx(0.5).epsilon(1e-3));
  std::filesystem::remove(path);
}

TEST_SUITE_END();
