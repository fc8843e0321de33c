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
#include <random>

namespace nqst {

using Rng = std::mt19937_64;

/// Stream identifiers so that independent consumers of one user seed never share a stream.
enum class StreamTag : std::uint32_t {
  init = 1,
  shuffle = 2,
  normalization = 3,
  target_sampling = 4,
  model_sampling = 5,
  mcmc = 6,
  trajectory = 7,
  validation = 8,
  misc = 9,
};

/// Deterministic generator for (seed, tag, index). Results depend only on these three values,
/// never on scheduling, so work split into indexed chunks reproduces exactly.
inline Rng make_stream(std::uint64_t seed, StreamTag tag, std::uint64_t index = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

}  // namespace nqst
