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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nqst/error.hpp"
#include "nqst/models/networks.hpp"
#include "nqst/povm/dataset.hpp"
#include "nqst/random.hpp"

namespace nqst {

/// Metropolis chains with a single-site proposal: pick a site uniformly and redraw its outcome
/// uniformly from the 4 labels.
struct ChainConfig {
  int n_chains = 32;
  long burn_in = -1;  // steps per chain; negative means 40 N
  long thinning = -1;  // negative means N
  std::uint64_t seed = 0;

  long resolved_burn_in(int n) const { return burn_in < 0 ? 40L * n : burn_in; }
  long resolved_thinning(int n) const { return thinning < 0 ? static_cast<long>(n) : thinning; }

  void validate(int n) const {
    require(n_chains >= 1, "need at least one chain");
    require(resolved_burn_in(n) >= 0, "burn_in must be non-negative");
    require(resolved_thinning(n) >= 1, "thinning must be at least 1");
  }
};

struct McmcReport {
  double acceptance_rate = 0.0;
  long steps_per_chain = 0;
};

inline double metropolis_acceptance(double log_ratio) { return log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio); }

/// Exact transition matrix T[to, from] of the single-site redraw kernel for a target given by
/// log weights over n_values^n_sites states (site 0 most significant).
inline Eigen::MatrixXd metropolis_transition_matrix(const std::vector<double>& log_p, int n_sites, int n_values) {
  std::size_t states = 1;
  for (int i = 0; i < n_sites; ++i) states *= static_cast<std::size_t>(n_values);
  require(log_p.size() == states, "log weights do not cover the state space");
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(states), static_cast<Eigen::Index>(states));
  const double q = 1.0 / (static_cast<double>(n_sites) * n_values);
  for (std::size_t from = 0; from < states; ++from) {
    double stay = 1.0;
    std::size_t place = states;
    for (int site = 0; site < n_sites; ++site) {
      place /= static_cast<std::size_t>(n_values);
      const std::size_t cur = (from / place) % static_cast<std::size_t>(n_values);
      for (int v = 0; v < n_values; ++v) {
        if (static_cast<std::size_t>(v) == cur) continue;
        const std::size_t to = from + (static_cast<std::size_t>(v) - cur) * place;
        const double p = q * metropolis_acceptance(log_p[to] - log_p[from]);
        T(static_cast<Eigen::Index>(to), static_cast<Eigen::Index>(from)) += p;
        stay -= p;
      }
    }
    T(static_cast<Eigen::Index>(from), static_cast<Eigen::Index>(from)) += stay;
  }
  return T;
}

/// Samples the unnormalized cnn with independent chains from uniform random starts. After burn-in
/// every `thinning`-th state is kept; chains are concatenated in chain order.
inline OutcomeDataset sample_cnn_mcmc(const nn::ModelParams& params, const ArchitectureSpec& spec,
                                      std::size_t n_samples, const ChainConfig& cfg, McmcReport* report = nullptr,
                                      std::uint32_t povm_code = 0) {
  require(spec.kind == ModelKind::cnn, "sample_cnn_mcmc needs a cnn architecture");
  check_params(spec, params);
  const int n = spec.n_sites();
  cfg.validate(n);
  const long burn = cfg.resolved_burn_in(n), thin = cfg.resolved_thinning(n);
  const auto C = static_cast<std::size_t>(cfg.n_chains);
  const auto N = static_cast<std::size_t>(n);

  std::vector<std::size_t> quota(C, n_samples / C);
  for (std::size_t c = 0; c < n_samples % C; ++c) ++quota[c];
  const std::size_t max_quota = quota.empty() ? 0 : quota[0];
  const long total_steps = burn + static_cast<long>(max_quota) * thin;

  std::vector<Rng> rngs;
  for (std::size_t c = 0; c < C; ++c) rngs.push_back(make_stream(cfg.seed, StreamTag::mcmc, c));
  std::vector<std::uint8_t> state(C * N), proposal(C * N);
  std::uniform_int_distribution<int> site_dist(0, n - 1), value_dist(0, kOutcomes - 1);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t i = 0; i < N; ++i) state[c * N + i] = static_cast<std::uint8_t>(value_dist(rngs[c]));
  std::vector<double> lp = evaluate_log_prob(params, spec, OutcomeBatch{state, N});

  std::vector<std::vector<std::uint8_t>> kept(C);
  for (std::size_t c = 0; c < C; ++c) kept[c].reserve(quota[c] * N);
  std::size_t accepted = 0, proposed = 0, accepted_window = 0, proposed_window = 0;
  bool warned = false;

  for (long step = 1; step <= total_steps; ++step) {
    proposal = state;
    for (std::size_t c = 0; c < C; ++c) {
      const int site = site_dist(rngs[c]);
      proposal[c * N + static_cast<std::size_t>(site)] = static_cast<std::uint8_t>(value_dist(rngs[c]));
    }
    const auto lq = evaluate_log_prob(params, spec, OutcomeBatch{proposal, N});
    for (std::size_t c = 0; c < C; ++c) {
      const double u = uniform01(rngs[c]);
      if (u < metropolis_acceptance(lq[c] - lp[c])) {
        std::copy_n(proposal.begin() + static_cast<std::ptrdiff_t>(c * N), N,
                    state.begin() + static_cast<std::ptrdiff_t>(c * N));
        lp[c] = lq[c];
        if (step > burn) ++accepted, ++accepted_window;
      }
      if (step > burn) ++proposed, ++proposed_window;
      if (step > burn && (step - burn) % thin == 0 && kept[c].size() < quota[c] * N)
        kept[c].insert(kept[c].end(), state.begin() + static_cast<std::ptrdiff_t>(c * N),
                       state.begin() + static_cast<std::ptrdiff_t>((c + 1) * N));
    }
    if (proposed_window >= 1000 * C) {
      if (!warned && static_cast<double>(accepted_window) < 0.01 * static_cast<double>(proposed_window)) {
        warn("MCMC acceptance below 1%: chains are not mixing");
        warned = true;
      }
      accepted_window = proposed_window = 0;
    }
  }

  OutcomeDataset ds;
  ds.n_qubits = n;
  ds.povm_code = povm_code;
  ds.seed = cfg.seed;
  ds.samples.reserve(n_samples * N);
  for (const auto& k : kept) ds.samples.insert(ds.samples.end(), k.begin(), k.end());
  if (report) {
    report->acceptance_rate = proposed ? static_cast<double>(accepted) / static_cast<double>(proposed) : 1.0;
    report->steps_per_chain = total_steps;
  }
  return ds;
}

}  // namespace nqst
