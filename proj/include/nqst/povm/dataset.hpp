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
#include <map>
#include <span>
#include <string>
#include <vector>

#include "nqst/binary_io.hpp"
#include "nqst/error.hpp"
#include "nqst/povm/povm.hpp"

namespace nqst {

/// Non-owning view of a batch of outcome strings stored sample-major.
struct OutcomeBatch {
  std::span<const std::uint8_t> data;
  std::size_t n_sites = 0;

  std::size_t size() const { return n_sites == 0 ? 0 : data.size() / n_sites; }
  std::span<const std::uint8_t> operator[](std::size_t i) const {
    return data.subspan(i * n_sites, n_sites);
  }
};

/// N_s measured outcome strings, one byte per site.
struct OutcomeDataset {
  int n_qubits = 0;
  int n_outcomes = 4;
  std::uint32_t povm_code = 0;
  std::uint64_t seed = 0;
  std::vector<std::uint8_t> samples;

  std::size_t size() const { return n_qubits == 0 ? 0 : samples.size() / static_cast<std::size_t>(n_qubits); }
  std::span<const std::uint8_t> sample(std::size_t i) const {
    return std::span<const std::uint8_t>(samples).subspan(i * static_cast<std::size_t>(n_qubits),
                                                           static_cast<std::size_t>(n_qubits));
  }
  OutcomeBatch batch() const { return {samples, static_cast<std::size_t>(n_qubits)}; }
  std::string povm_id() const { return povm_from_code(povm_code).id(); }

  void validate() const {
    if (n_qubits <= 0) throw ConfigError("dataset has no sites");
    if (samples.empty() || samples.size() % static_cast<std::size_t>(n_qubits) != 0)
      throw ConfigError("dataset must contain a positive whole number of samples");
    for (auto v : samples)
      if (v >= n_outcomes) throw ConfigError("dataset outcome out of range");
  }
};

/// Keeps only the listed sites of every outcome string (exact marginalization for product POVMs).
inline OutcomeDataset restrict_to(const OutcomeDataset& ds, std::span<const int> support) {
  OutcomeDataset out;
  out.n_qubits = static_cast<int>(support.size());
  out.n_outcomes = ds.n_outcomes;
  out.povm_code = ds.povm_code;
  out.seed = ds.seed;
  out.samples.reserve(ds.size() * support.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto s = ds.sample(i);
    for (int site : support) {
      if (site < 0 || site >= ds.n_qubits) throw ConfigError("support site outside the dataset");
      out.samples.push_back(s[static_cast<std::size_t>(site)]);
    }
  }
  return out;
}

/// Counts of each distinct outcome string, keyed by `outcome_index`.
inline std::map<std::size_t, std::size_t> outcome_counts(const OutcomeDataset& ds) {
  std::map<std::size_t, std::size_t> counts;
  for (std::size_t i = 0; i < ds.size(); ++i) ++counts[outcome_index(ds.sample(i))];
  return counts;
}

inline std::vector<double> empirical_distribution(const OutcomeDataset& ds) {
  std::vector<double> f(pow4(ds.n_qubits), 0.0);
  const double w = 1.0 / static_cast<double>(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) f[outcome_index(ds.sample(i))] += w;
  return f;
}

// Dataset file (little-endian):
//   "POVM" | u16 version | u16 K_out | u32 N | u32 reserved   (16 bytes)
//   u64 N_s | u64 seed | N_s * N outcome bytes, sample-major.
// The reserved word carries the POVM code (0 = pauli4, 1 = pauli4-flipped).
inline constexpr std::uint16_t kDatasetVersion = 1;

inline void write_dataset(const std::string& path, const OutcomeDataset& ds) {
  ds.validate();
  auto out = io::open_for_write(path);
  io::write_magic(out, "POVM");
  io::write_le<std::uint16_t>(out, kDatasetVersion);
  io::write_le<std::uint16_t>(out, static_cast<std::uint16_t>(ds.n_outcomes));
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(ds.n_qubits));
  io::write_le<std::uint32_t>(out, ds.povm_code);
  io::write_le<std::uint64_t>(out, ds.size());
  io::write_le<std::uint64_t>(out, ds.seed);
  out.write(reinterpret_cast<const char*>(ds.samples.data()), static_cast<std::streamsize>(ds.samples.size()));
  if (!out) throw ConfigError("failed writing dataset '" + path + "'");
}

inline OutcomeDataset read_dataset(const std::string& path) {
  auto in = io::open_for_read(path);
  io::expect_magic(in, "POVM", path);
  if (io::read_le<std::uint16_t>(in) != kDatasetVersion) throw ConfigError(path + ": unsupported dataset version");
  OutcomeDataset ds;
  ds.n_outcomes = io::read_le<std::uint16_t>(in);
  ds.n_qubits = static_cast<int>(io::read_le<std::uint32_t>(in));
  ds.povm_code = io::read_le<std::uint32_t>(in);
  const auto n_samples = io::read_le<std::uint64_t>(in);
  ds.seed = io::read_le<std::uint64_t>(in);
  if (ds.n_qubits <= 0 || ds.n_qubits > 4096) throw ConfigError(path + ": implausible site count");
  ds.samples.resize(n_samples * static_cast<std::uint64_t>(ds.n_qubits));
  in.read(reinterpret_cast<char*>(ds.samples.data()), static_cast<std::streamsize>(ds.samples.size()));
  if (!in) throw ConfigError(path + ": truncated dataset payload");
  ds.validate();
  return ds;
}

}  // namespace nqst
