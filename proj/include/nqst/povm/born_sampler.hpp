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
#include <string>
#include <vector>

#include "nqst/error.hpp"
#include "nqst/povm/dataset.hpp"
#include "nqst/povm/povm.hpp"
#include "nqst/quantum/states.hpp"
#include "nqst/random.hpp"

namespace nqst {

inline constexpr int kSamplingQubitCap = 24;
inline constexpr std::size_t kSamplesPerStream = 1024;

/// Draws one outcome string from a pure state site by site. Each fixed site is contracted
/// with the Kraus branches of its outcome, so only the operator on the remaining sites is
/// carried forward: a collection of (unnormalized) vectors whose total size never exceeds 2^N.
class PureStateSampler {
 public:
  PureStateSampler(const PureState& psi, const PovmSpec& povm)
      : psi_(psi), povm_(povm), n_(psi.n_qubits()), work_(psi.dimension()), next_(psi.dimension()) {
    if (n_ > kSamplingQubitCap) throw ConfigError("sampling is limited to 24 qubits");
  }

  void draw(Rng& rng, std::span<std::uint8_t> out) {
    std::size_t size = psi_.dimension();
    std::copy(psi_.amplitudes.data(), psi_.amplitudes.data() + size, work_.begin());
    std::size_t branch_dim = size;
    for (int site = 0; site < n_; ++site) {
      const std::size_t half = branch_dim / 2;
      const std::size_t n_branches = size / branch_dim;
      double r00 = 0.0, r11 = 0.0;
      cplx r01 = 0.0;  // rho_{0,1} = sum h0 conj(h1)
      for (std::size_t b = 0; b < n_branches; ++b) {
        const cplx* h0 = work_.data() + b * branch_dim;
        const cplx* h1 = h0 + half;
        for (std::size_t k = 0; k < half; ++k) {
          r00 += std::norm(h0[k]);
          r11 += std::norm(h1[k]);
          r01 += h0[k] * std::conj(h1[k]);
        }
      }
      Mat2 rho;
      rho << r00, r01, std::conj(r01), r11;
      double probs[4];
      double total = 0.0;
      for (int a = 0; a < 4; ++a) {
        probs[a] = std::max(0.0, (rho * povm_.elements[static_cast<std::size_t>(a)]).trace().real());
        total += probs[a];
      }
      double u = uniform01(rng) * total;
      int chosen = 3;
      for (int a = 0; a < 4; ++a) {
        if (u < probs[a]) { chosen = a; break; }
        u -= probs[a];
      }
      while (probs[chosen] <= 0.0) chosen = (chosen + 3) % 4;
      out[static_cast<std::size_t>(site)] = static_cast<std::uint8_t>(chosen);

      // chi'[rest] = sqrt(lambda) * sum_c conj(e[c]) chi[c, rest] for each branch of M_a.
      const auto& branches = povm_.branches[static_cast<std::size_t>(chosen)];
      std::size_t w = 0;
      for (std::size_t b = 0; b < n_branches; ++b) {
        const cplx* h0 = work_.data() + b * branch_dim;
        const cplx* h1 = h0 + half;
        for (const auto& br : branches) {
          const cplx c0 = br.sqrt_weight * std::conj(br.vector(0));
          const cplx c1 = br.sqrt_weight * std::conj(br.vector(1));
          cplx* dst = next_.data() + w;
          for (std::size_t k = 0; k < half; ++k) dst[k] = c0 * h0[k] + c1 * h1[k];
          w += half;
        }
      }
      work_.swap(next_);
      size = w;
      branch_dim = half;
      if (size > psi_.dimension()) throw NumericalError("sampler workspace overflow");
    }
  }

 private:
  const PureState& psi_;
  const PovmSpec& povm_;
  int n_;
  std::vector<cplx> work_, next_;
};

namespace detail {

inline std::discrete_distribution<int> single_site_mixed(const PovmSpec& povm) {
  std::vector<double> w;
  for (const auto& M : povm.elements) w.push_back(M.trace().real() / 2.0);
  return {w.begin(), w.end()};
}

inline StateEnsemble spectral_ensemble(const DensityMatrix& rho) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(rho.entries);
  std::vector<double> w;
  std::vector<PureState> m;
  double total = 0.0;
  for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) {
    const double lam = es.eigenvalues()(k);
    if (lam > 1e-14) {
      w.push_back(lam);
      total += lam;
      m.push_back(PureState::normalized(es.eigenvectors().col(k)));
    }
  }
  for (double& x : w) x /= total;
  return {std::move(w), std::move(m)};
}

}  // namespace detail

/// i.i.d. Born-rule samples from any target. Samples are produced in fixed-size chunks, each
/// with its own stream derived from (seed, chunk), so output never depends on scheduling.
inline OutcomeDataset sample_outcomes(const Target& target, const PovmSpec& povm,
                                      std::size_t n_samples, std::uint64_t seed) {
  require(n_samples > 0, "need at least one sample");
  const int n = n_qubits(target);
  if (n > kSamplingQubitCap) throw ConfigError("sampling is limited to 24 qubits");
  OutcomeDataset ds;
  ds.n_qubits = n;
  ds.n_outcomes = povm.n_outcomes;
  ds.povm_code = povm.code();
  ds.seed = seed;
  ds.samples.resize(n_samples * static_cast<std::size_t>(n));
  auto row = [&](std::size_t i) {
    return std::span<std::uint8_t>(ds.samples).subspan(i * static_cast<std::size_t>(n), static_cast<std::size_t>(n));
  };

  // Density matrices are sampled through their spectral decomposition.
  const StateEnsemble* ensemble = std::get_if<StateEnsemble>(&target);
  StateEnsemble spectral;
  if (const auto* rho = std::get_if<DensityMatrix>(&target)) {
    spectral = detail::spectral_ensemble(*rho);
    ensemble = &spectral;
  }

  auto mixed = detail::single_site_mixed(povm);
  const std::size_t n_chunks = (n_samples + kSamplesPerStream - 1) / kSamplesPerStream;
  if (ensemble != nullptr) {
    std::vector<PureStateSampler> samplers;
    samplers.reserve(ensemble->members.size());
    for (const auto& m : ensemble->members) samplers.emplace_back(m, povm);
    std::discrete_distribution<std::size_t> pick(ensemble->weights.begin(), ensemble->weights.end());
    for (std::size_t c = 0; c < n_chunks; ++c) {
      Rng rng = make_stream(seed, StreamTag::target_sampling, c);
      for (std::size_t i = c * kSamplesPerStream; i < std::min(n_samples, (c + 1) * kSamplesPerStream); ++i)
        samplers[pick(rng)].draw(rng, row(i));
    }
    return ds;
  }

  const PureState* pure = std::get_if<PureState>(&target);
  double p_mixed = 0.0;
  if (const auto* deph = std::get_if<DephasedState>(&target)) {
    pure = &deph->pure;
    p_mixed = deph->p;
  }
  PureStateSampler sampler(*pure, povm);
  for (std::size_t c = 0; c < n_chunks; ++c) {
    Rng rng = make_stream(seed, StreamTag::target_sampling, c);
    for (std::size_t i = c * kSamplesPerStream; i < std::min(n_samples, (c + 1) * kSamplesPerStream); ++i) {
      if (p_mixed > 0.0 && uniform01(rng) < p_mixed) {
        for (auto& v : row(i)) v = static_cast<std::uint8_t>(mixed(rng));
      } else {
        sampler.draw(rng, row(i));
      }
    }
  }
  return ds;
}

}  // namespace nqst
