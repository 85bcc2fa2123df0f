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

#include "mtevc/dsp/waveform.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "mtevc/error.hpp"

namespace mtevc::dsp {

namespace {

uint32_t read_u32(std::istream& s) {
  unsigned char b[4];
  s.read(reinterpret_cast<char*>(b), 4);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}

uint16_t read_u16(std::istream& s) {
  unsigned char b[2];
  s.read(reinterpret_cast<char*>(b), 2);
  return static_cast<uint16_t>(b[0]) | (static_cast<uint16_t>(b[1]) << 8);
}

void write_u32(std::ostream& s, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  s.write(reinterpret_cast<char*>(b), 4);
}

void write_u16(std::ostream& s, uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff)};
  s.write(reinterpret_cast<char*>(b), 2);
}

}  // namespace

Waveform read_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open WAV file: " + path);

  char tag[5] = {0};
  f.read(tag, 4);
  if (std::strncmp(tag, "RIFF", 4) != 0)
    throw InvalidInput(path + ": chunk id '" + std::string(tag, 4) +
                       "' (expected RIFF)");
  read_u32(f);  // riff size, unused
  f.read(tag, 4);
  if (std::strncmp(tag, "WAVE", 4) != 0)
    throw InvalidInput(path + ": format '" + std::string(tag, 4) +
                       "' (expected WAVE)");

  bool have_fmt = false;
  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  std::vector<float> samples;

  while (f.read(tag, 4)) {
    uint32_t size = read_u32(f);
    std::string id(tag, 4);
    if (id == "fmt ") {
      format = read_u16(f);
      channels = read_u16(f);
      rate = read_u32(f);
      read_u32(f);  // byte rate
      read_u16(f);  // block align
      bits = read_u16(f);
      if (size > 16) f.seekg(size - 16, std::ios::cur);
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw InvalidInput(path + ": data chunk before fmt");
      if (format != 1)
        throw InvalidInput(path + ": audio_format=" + std::to_string(format) +
                           " (expected 1, PCM)");
      if (channels != 1)
        throw InvalidInput(path + ": channels=" + std::to_string(channels) +
                           " (expected 1, mono)");
      if (bits != 16)
        throw InvalidInput(path + ": bits_per_sample=" + std::to_string(bits) +
                           " (expected 16)");
      if (rate != 16000)
        throw InvalidInput(path + ": sample_rate=" + std::to_string(rate) +
                           " (expected 16000)");
      size_t n = size / 2;
      samples.resize(n);
      std::vector<unsigned char> raw(size);
      f.read(reinterpret_cast<char*>(raw.data()), size);
      if (!f) throw IoError(path + ": truncated data chunk");
      for (size_t i = 0; i < n; ++i) {
        int16_t v = static_cast<int16_t>(
            static_cast<uint16_t>(raw[2 * i]) |
            (static_cast<uint16_t>(raw[2 * i + 1]) << 8));
        samples[i] = static_cast<float>(v) / 32768.0f;
      }
      Waveform w;
      w.samples = std::move(samples);
      w.sample_rate_hz = static_cast<int>(rate);
      return w;
    } else {
      // Skip unknown chunks (LIST, fact, ...). Chunks are word-aligned.
      f.seekg(size + (size & 1), std::ios::cur);
    }
  }
  throw InvalidInput(path + ": no data chunk found");
}

void write_wav(const std::string& path, const Waveform& w) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write WAV file: " + path);

  uint32_t data_size = static_cast<uint32_t>(w.samples.size() * 2);
  f.write("RIFF", 4);
  write_u32(f, 36 + data_size);
  f.write("WAVE", 4);
  f.write("fmt ", 4);
  write_u32(f, 16);
  write_u16(f, 1);  // PCM
  write_u16(f, 1);  // mono
  write_u32(f, static_cast<uint32_t>(w.sample_rate_hz));
  write_u32(f, static_cast<uint32_t>(w.sample_rate_hz * 2));
  write_u16(f, 2);
  write_u16(f, 16);
  f.write("data", 4);
  write_u32(f, data_size);
  for (float s : w.samples) {
    long q = std::lrint(static_cast<double>(s) * 32768.0);
    int16_t v = static_cast<int16_t>(std::clamp(q, -32767L, 32767L));
    unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff)};
    f.write(reinterpret_cast<char*>(b), 2);
  }
  if (!f) throw IoError("write failed: " + path);
}

}  // namespace mtevc::dsp
