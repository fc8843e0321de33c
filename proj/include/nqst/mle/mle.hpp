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

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "nqst/error.hpp"
#include "nqst/povm/dataset.hpp"
#include "nqst/povm/povm.hpp"
#include "nqst/quantum/states.hpp"

namespace nqst {

inline constexpr int kMleQubitCap = 8;
inline constexpr int kLocalMleSiteCap = 6;

struct MleConfig {
  int max_iterations = 5000;
  double tolerance = 1e-10;  // stop when the log-likelihood gain drops below this
  double epsilon = 1e-12;    // identity mixing when an observed outcome has vanishing probability

  void validate() const {
    require(max_iterations >= 1, "max_iterations must be positive");
    require(tolerance > 0.0, "tolerance must be positive");
  }
};

struct MleResult {
  DensityMatrix rho;
  int iterations = 0;
  bool converged = false;
  std::vector<double> log_likelihood;  // mean log-likelihood per sample, one entry per accepted state
};

/// Iterative maximum likelihood: rho <- R rho R / Tr[R rho R] with R = sum_a (f_a / P_rho(a)) M_a
/// over the observed outcome strings, starting from the maximally mixed state.
inline MleResult mle_reconstruct(const OutcomeDataset& ds, const PovmSpec& povm, const MleConfig& cfg = {}) {
  ds.validate();
  cfg.validate();
  const int n = ds.n_qubits;
  require(n <= kMleQubitCap, "MLE is limited to " + std::to_string(kMleQubitCap) + " qubits");
  const auto counts = outcome_counts(ds);
  const double ns = static_cast<double>(ds.size());
  std::vector<std::pair<std::size_t, double>> freq;
  freq.reserve(counts.size());
  for (const auto& [idx, c] : counts) freq.emplace_back(idx, static_cast<double>(c) / ns);

  const auto dim = Eigen::Index{1} << n;
  CMatrix rho = CMatrix::Identity(dim, dim) / static_cast<double>(dim);

  auto probabilities = [&](CMatrix& r) {
    auto tr = povm_traces(r, povm);
    double pmin = 1.0;
    for (const auto& [idx, f] : freq) pmin = std::min(pmin, tr[idx].real());
    if (pmin <= 1e-300) {
      warn("MLE: an observed outcome has vanishing probability; mixing in epsilon * identity");
      r = (1.0 - cfg.epsilon) * r + cfg.epsilon * CMatrix::Identity(dim, dim) / static_cast<double>(dim);
      tr = povm_traces(r, povm);
    }
    return tr;
  };
  auto loglik = [&](const std::vector<cplx>& tr) {
    double L = 0.0;
    for (const auto& [idx, f] : freq) L += f * std::log(tr[idx].real());
    return L;
  };

  MleResult res;
  auto tr = probabilities(rho);
  double L = loglik(tr);
  res.log_likelihood.push_back(L);
  std::vector<cplx> w(pow4(n));
  for (int it = 1; it <= cfg.max_iterations; ++it) {
    std::fill(w.begin(), w.end(), cplx(0.0));
    for (const auto& [idx, f] : freq) w[idx] = f / tr[idx].real();
    const CMatrix R = povm_synthesis(w, povm, n);
    CMatrix next = R * rho * R;
    next = 0.5 * (next + next.adjoint().eval());
    next /= next.trace().real();
    auto tr_next = probabilities(next);
    const double L_next = loglik(tr_next);
    res.iterations = it;
    if (!(L_next >= L)) {
      // RrhoR without dilution is not guaranteed to ascend; keep the last ascending state.
      res.converged = L - L_next < cfg.tolerance;
      break;
    }
    const double gain = L_next - L;
    rho = std::move(next);
    tr = std::move(tr_next);
    L = L_next;
    res.log_likelihood.push_back(L);
    if (gain < cfg.tolerance) {
      res.converged = true;
      break;
    }
  }
  res.rho = DensityMatrix::cleaned(rho);
  return res;
}

/// MLE on the marginal data of `support` (product POVMs marginalize exactly).
inline MleResult local_mle(const OutcomeDataset& ds, std::span<const int> support, const PovmSpec& povm,
                           const MleConfig& cfg = {}) {
  require(!support.empty() && static_cast<int>(support.size()) <= kLocalMleSiteCap,
          "local MLE support must have 1 to " + std::to_string(kLocalMleSiteCap) + " sites");
  return mle_reconstruct(restrict_to(ds, support), povm, cfg);
}

}  // namespace nqst
