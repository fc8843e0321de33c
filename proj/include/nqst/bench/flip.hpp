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

#include <array>
#include <vector>

#include "nqst/bench/config.hpp"
#include "nqst/povm/dataset.hpp"

namespace nqst::bench {

struct FlipDiagnostics {
  double min_frequency = 1.0;
  int site = 0;
  int outcome = 0;
};

/// Smallest single-site outcome frequency over all sites and outcomes.
inline FlipDiagnostics single_site_diagnostics(const std::vector<std::array<double, 4>>& marginals) {
  FlipDiagnostics d;
  for (std::size_t i = 0; i < marginals.size(); ++i)
    for (int a = 0; a < 4; ++a)
      if (marginals[i][static_cast<std::size_t>(a)] < d.min_frequency) {
        d.min_frequency = marginals[i][static_cast<std::size_t>(a)];
        d.site = static_cast<int>(i);
        d.outcome = a;
      }
  return d;
}

inline std::vector<std::array<double, 4>> single_site_frequencies(const OutcomeDataset& pilot) {
  std::vector<std::array<double, 4>> f(static_cast<std::size_t>(pilot.n_qubits), std::array<double, 4>{});
  const double w = 1.0 / static_cast<double>(pilot.size());
  for (std::size_t s = 0; s < pilot.size(); ++s) {
    const auto a = pilot.sample(s);
    for (std::size_t i = 0; i < a.size(); ++i) f[i][a[i]] += w;
  }
  return f;
}

/// True when the unflipped Pauli-4 leaves some single-site outcome nearly unpopulated, in which
/// case the model should be trained on the flipped POVM. The pilot must use the unflipped POVM.
inline bool flip_decision(const std::vector<std::array<double, 4>>& marginals, double threshold = kDefaultFlipThreshold) {
  return single_site_diagnostics(marginals).min_frequency < threshold;
}

inline bool flip_decision(const OutcomeDataset& pilot, double threshold = kDefaultFlipThreshold) {
  return flip_decision(single_site_frequencies(pilot), threshold);
}

}  // namespace nqst::bench
