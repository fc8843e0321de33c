// Copyright 2026 The nqst Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include "nqst/binary_io.hpp"
#include "nqst/models/architecture.hpp"

namespace nqst {

inline constexpr std::uint16_t kCheckpointVersion = 1;

// Architecture id bits: 0 kind (arcnn), 1 two_d, 2 circular, 3 dense head.
inline std::uint16_t architecture_id(const ArchitectureSpec& s) {
  return static_cast<std::uint16_t>((s.kind == ModelKind::arcnn ? 1 : 0) | (s.two_d ? 2 : 0) |
                                    (s.boundary == ConvBoundary::circular ? 4 : 0) |
                                    (s.head == OutputHead::dense ? 8 : 0));
}

struct Checkpoint {
  ArchitectureSpec spec;
  nn::ModelParams params;
};

/// Layout: "NQST", u16 version, u16 architecture id, u32 N, rows, cols, L, K, F, u32 tensor count,
/// then per tensor: u32 name length, name, u32 rank, u64 dims, f64 payload.
inline void save_checkpoint(const std::string& path, const ArchitectureSpec& s, const nn::ModelParams& params) {
  check_params(s, params);
  auto out = io::open_for_write(path);
  io::write_magic(out, "NQST");
  io::write_le<std::uint16_t>(out, kCheckpointVersion);
  io::write_le<std::uint16_t>(out, architecture_id(s));
  for (int v : {s.n_sites(), s.rows, s.cols, s.layers, s.kernel, s.features})
    io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(v));
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, t] : params) {
    io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) io::write_le<std::uint64_t>(out, d);
    for (double v : t.values()) io::write_le<double>(out, v);
  }
  if (!out) throw ConfigError("failed writing checkpoint '" + path + "'");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  auto in = io::open_for_read(path);
  io::expect_magic(in, "NQST", path);
  const auto version = io::read_le<std::uint16_t>(in);
  if (version != kCheckpointVersion) throw ConfigError(path + ": unsupported checkpoint version");
  const auto id = io::read_le<std::uint16_t>(in);
  Checkpoint c;
  ArchitectureSpec& s = c.spec;
  s.kind = (id & 1) ? ModelKind::arcnn : ModelKind::cnn;
  s.two_d = (id & 2) != 0;
  s.boundary = (id & 4) ? ConvBoundary::circular : ConvBoundary::open;
  s.head = (id & 8) ? OutputHead::dense : OutputHead::product;
  const auto n = io::read_le<std::uint32_t>(in);
  s.rows = static_cast<int>(io::read_le<std::uint32_t>(in));
  s.cols = static_cast<int>(io::read_le<std::uint32_t>(in));
  s.layers = static_cast<int>(io::read_le<std::uint32_t>(in));
  s.kernel = static_cast<int>(io::read_le<std::uint32_t>(in));
  s.features = static_cast<int>(io::read_le<std::uint32_t>(in));
  if (static_cast<int>(n) != s.n_sites()) throw ConfigError(path + ": site count does not match rows x cols");
  s.validate();
  const auto count = io::read_le<std::uint32_t>(in);
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto len = io::read_le<std::uint32_t>(in);
    if (len > 256) throw ConfigError(path + ": implausible tensor name length");
    std::string name(len, '\0');
    in.read(name.data(), len);
    const auto rank = io::read_le<std::uint32_t>(in);
    if (rank > 8) throw ConfigError(path + ": implausible tensor rank");
    nn::Shape shape(rank);
    for (auto& d : shape) d = io::read_le<std::uint64_t>(in);
    nn::Tensor t(shape);
    for (auto& v : t.values()) v = io::read_le<double>(in);
    c.params.emplace(std::move(name), std::move(t));
  }
  check_params(s, c.params);
  return c;
}

}  // namespace nqst
