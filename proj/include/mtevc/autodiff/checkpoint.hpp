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

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "mtevc/autodiff/adam.hpp"
#include "mtevc/autodiff/params.hpp"
#include "mtevc/error.hpp"

namespace mtevc::autodiff {

// Checkpoint file layout (all integers little endian):
//   magic "MTEVC", u32 version, u64 config fingerprint, u32 param count,
//   then per parameter: u32 name length, name bytes, u8 dtype (0 = f32,
//   1 = f64), u8 rank, u32 dims[rank], raw payload. A trailing u8 flags
//   optimizer state: u64 step, then per trainable parameter in store
//   order: u32 name length, name bytes, u64 element count, f64 first
//   moments, f64 second moments.

namespace detail {

inline void write_bytes(std::ostream& os, const void* p, size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <class T>
void write_le(std::ostream& os, T v) {
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  write_bytes(os, buf, sizeof(T));
}

inline void write_str(std::ostream& os, const std::string& s) {
  write_le<uint32_t>(os, static_cast<uint32_t>(s.size()));
  write_bytes(os, s.data(), s.size());
}

inline void read_bytes(std::istream& is, void* p, size_t n,
                       const char* what) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (!is) throw IoError(std::string("checkpoint truncated while reading ") +
                         what);
}

template <class T>
T read_le(std::istream& is, const char* what) {
  T v;
  read_bytes(is, &v, sizeof(T), what);
  return v;
}

inline std::string read_str(std::istream& is, const char* what) {
  uint32_t n = read_le<uint32_t>(is, what);
  if (n > (1u << 20))
    throw IoError(std::string("checkpoint name too long for ") + what);
  std::string s(n, '\0');
  read_bytes(is, s.data(), n, what);
  return s;
}

template <class S>
constexpr uint8_t dtype_code() {
  return sizeof(S) == 4 ? 0 : 1;
}

}  // namespace detail

inline constexpr uint32_t kCheckpointVersion = 1;

template <class S>
void save_checkpoint(const std::string& path, const ParamStore<S>& params,
                     uint64_t fingerprint, const Adam<S>* optimizer = nullptr) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw IoError("cannot open '" + tmp + "' for writing");
    detail::write_bytes(os, "MTEVC", 5);
    detail::write_le<uint32_t>(os, kCheckpointVersion);
    detail::write_le<uint64_t>(os, fingerprint);
    detail::write_le<uint32_t>(os,
                               static_cast<uint32_t>(params.entries().size()));
    for (const auto& e : params.entries()) {
      detail::write_str(os, e.name);
      detail::write_le<uint8_t>(os, detail::dtype_code<S>());
      detail::write_le<uint8_t>(os, static_cast<uint8_t>(e.tensor.rank()));
      for (long d : e.tensor.shape())
        detail::write_le<uint32_t>(os, static_cast<uint32_t>(d));
      detail::write_bytes(os, e.tensor.data(), e.tensor.size() * sizeof(S));
    }
    detail::write_le<uint8_t>(os, optimizer ? 1 : 0);
    if (optimizer) {
      detail::write_le<uint64_t>(
          os, static_cast<uint64_t>(optimizer->step_count()));
      for (const auto& e : params.entries()) {
        if (!e.trainable) continue;
        detail::write_str(os, e.name);
        const auto& m = optimizer->m().at(e.name);
        const auto& v = optimizer->v().at(e.name);
        detail::write_le<uint64_t>(os, static_cast<uint64_t>(m.size()));
        detail::write_bytes(os, m.data(), m.size() * sizeof(double));
        detail::write_bytes(os, v.data(), v.size() * sizeof(double));
      }
    }
    if (!os) throw IoError("write failed for '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

// Restores parameters (and optimizer state when present and requested)
// saved by save_checkpoint. The fingerprint written at save time must
// match expected_fingerprint. Returns the restored optimizer step, 0 when
// the file carries no optimizer state.
template <class S>
long load_checkpoint(const std::string& path, ParamStore<S>& params,
                     uint64_t expected_fingerprint,
                     Adam<S>* optimizer = nullptr) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint '" + path + "'");
  char magic[5];
  detail::read_bytes(is, magic, 5, "magic");
  if (std::memcmp(magic, "MTEVC", 5) != 0)
    throw IoError("'" + path + "' is not a checkpoint file");
  uint32_t version = detail::read_le<uint32_t>(is, "version");
  if (version != kCheckpointVersion)
    throw CompatibilityError("checkpoint version " + std::to_string(version) +
                             ", this build reads version " +
                             std::to_string(kCheckpointVersion));
  uint64_t fp = detail::read_le<uint64_t>(is, "fingerprint");
  if (fp != expected_fingerprint)
    throw CompatibilityError(
        "checkpoint was written for a different configuration (fingerprint " +
        std::to_string(fp) + ", expected " +
        std::to_string(expected_fingerprint) + ")");
  uint32_t count = detail::read_le<uint32_t>(is, "parameter count");
  if (count != params.entries().size())
    throw CompatibilityError("checkpoint holds " + std::to_string(count) +
                             " parameters, model has " +
                             std::to_string(params.entries().size()));
  for (uint32_t i = 0; i < count; ++i) {
    std::string name = detail::read_str(is, "parameter name");
    auto& e = params.entries()[i];
    if (name != e.name)
      throw CompatibilityError("checkpoint parameter #" + std::to_string(i) +
                               " is '" + name + "', model expects '" + e.name +
                               "'");
    uint8_t dtype = detail::read_le<uint8_t>(is, "dtype");
    if (dtype != detail::dtype_code<S>())
      throw CompatibilityError("parameter '" + name +
                               "' has a different scalar type");
    uint8_t rank = detail::read_le<uint8_t>(is, "rank");
    Shape shape(rank);
    for (uint8_t d = 0; d < rank; ++d)
      shape[d] = detail::read_le<uint32_t>(is, "dimension");
    if (shape != e.tensor.shape())
      throw CompatibilityError("parameter '" + name + "' has shape " +
                               shape_str(shape) + ", model expects " +
                               shape_str(e.tensor.shape()));
    detail::read_bytes(is, e.tensor.data(), e.tensor.size() * sizeof(S),
                       name.c_str());
  }
  uint8_t has_opt = detail::read_le<uint8_t>(is, "optimizer flag");
  long step = 0;
  if (has_opt) {
    step = static_cast<long>(detail::read_le<uint64_t>(is, "optimizer step"));
    std::unordered_map<std::string, std::vector<double>> m, v;
    for (const auto& e : params.entries()) {
      if (!e.trainable) continue;
      std::string name = detail::read_str(is, "optimizer entry name");
      if (name != e.name)
        throw CompatibilityError("optimizer entry '" + name +
                                 "' does not match parameter '" + e.name +
                                 "'");
      uint64_t n = detail::read_le<uint64_t>(is, "optimizer entry size");
      if (n != static_cast<uint64_t>(e.tensor.size()))
        throw CompatibilityError("optimizer entry '" + name +
                                 "' has wrong element count");
      std::vector<double> mv(n), vv(n);
      detail::read_bytes(is, mv.data(), n * sizeof(double), "first moments");
      detail::read_bytes(is, vv.data(), n * sizeof(double), "second moments");
      m[name] = std::move(mv);
      v[name] = std::move(vv);
    }
    if (optimizer) optimizer->restore(step, std::move(m), std::move(v));
  }
  return has_opt ? step : 0;
}

}  // namespace mtevc::autodiff
