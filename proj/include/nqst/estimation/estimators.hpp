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

#include "nqst/error.hpp"
#include "nqst/povm/dataset.hpp"
#include "nqst/povm/povm.hpp"
#include "nqst/quantum/lattice.hpp"
#include "nqst/quantum/states.hpp"

namespace nqst {

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
};

struct MetricsRecord {
  std::string metric;
  double value = 0.0;
  double std_error = 0.0;
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
  std::string provenance;
};

namespace detail {

inline Estimate mean_and_error(const std::vector<double>& v) {
  require(!v.empty(), "cannot estimate from an empty dataset");
  const double n = static_cast<double>(v.size());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double sd = v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  return {mean, sd / std::sqrt(n)};
}

inline bool proportional_to_identity(const CMatrix& op, cplx& c) {
  c = op(0, 0);
  return (op - c * CMatrix::Identity(op.rows(), op.cols())).cwiseAbs().maxCoeff() == 0.0;
}

}  // namespace detail

/// Per-sample values O_a of a representation over a dataset.
template <class Rep>
std::vector<double> representation_values(const OutcomeDataset& ds, const Rep& rep) {
  std::vector<double> v(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) v[i] = rep(ds.sample(i));
  return v;
}

/// Sample mean of the POVM representation with standard error std / sqrt(N_s).
inline Estimate estimate_observable(const OutcomeDataset& ds, const LocalObservable& obs, const PovmSpec& povm) {
  obs.check_range(ds.n_qubits);
  cplx c;
  if (detail::proportional_to_identity(obs.op, c)) return {c.real(), 0.0};
  return detail::mean_and_error(representation_values(ds, observable_povm_representation(obs, povm)));
}

inline Estimate estimate_product(const OutcomeDataset& ds, const ProductRepresentation& rep) {
  return detail::mean_and_error(representation_values(ds, rep));
}

/// C_n = (1/(N-n+1)) sum_i <z_i ... z_{i+n-1}>. Each sample contributes the site average, so the
/// error bar includes the covariance between the terms.
inline Estimate correlator_powers(const OutcomeDataset& ds, int order, const PovmSpec& povm) {
  const int n = ds.n_qubits;
  require(order >= 1 && order <= n, "correlator order must lie in [1, N]");
  const Eigen::VectorXd z = povm.representation(pauli::z());
  const int terms = n - order + 1;
  std::vector<double> v(ds.size());
  for (std::size_t s = 0; s < ds.size(); ++s) {
    const auto a = ds.sample(s);
    double acc = 0.0;
    for (int i = 0; i < terms; ++i) {
      double p = 1.0;
      for (int k = 0; k < order; ++k) p *= z(a[static_cast<std::size_t>(i + k)]);
      acc += p;
    }
    v[s] = acc / terms;
  }
  return detail::mean_and_error(v);
}

inline double exact_correlator_power(const Target& t, int order) {
  const int n = n_qubits(t);
  require(order >= 1 && order <= n, "correlator order must lie in [1, N]");
  double acc = 0.0;
  for (int i = 0; i + order <= n; ++i) {
    std::vector<int> sites(static_cast<std::size_t>(order));
    for (int k = 0; k < order; ++k) sites[static_cast<std::size_t>(k)] = i + k;
    acc += z_string_expectation(t, sites);
  }
  return acc / (n - order + 1);
}

enum class SiteSubset { full_lattice, main_diagonal };

struct WeightedPair {
  int i = 0;
  int j = 0;
  double weight = 0.0;  // |r_i - r_j|^2
};

/// Unordered site pairs of the subset with squared Euclidean distances (open geometry).
inline std::vector<WeightedPair> correlation_pairs(const SpinLattice& lattice, SiteSubset subset) {
  require(lattice.geometry == Geometry::grid, "correlation length needs a grid lattice");
  std::vector<int> sites;
  if (subset == SiteSubset::full_lattice) {
    for (int s = 0; s < lattice.n_qubits(); ++s) sites.push_back(s);
  } else {
    for (int k = 0; k < std::min(lattice.rows, lattice.cols); ++k) sites.push_back(k * lattice.cols + k);
  }
  std::vector<WeightedPair> pairs;
  for (std::size_t a = 0; a < sites.size(); ++a)
    for (std::size_t b = a + 1; b < sites.size(); ++b) {
      const int i = sites[a], j = sites[b];
      const double dr = i / lattice.cols - j / lattice.cols, dc = i % lattice.cols - j % lattice.cols;
      pairs.push_back({i, j, dr * dr + dc * dc});
    }
  return pairs;
}

namespace detail {

// Plug-in xi^2 from site means m_i and pair means c_ij.
inline double xi_from_moments(const std::vector<WeightedPair>& pairs, const std::vector<double>& m,
                              const std::vector<double>& c) {
  double acc = 0.0;
  for (std::size_t k = 0; k < pairs.size(); ++k)
    acc += pairs[k].weight * (c[k] - m[static_cast<std::size_t>(pairs[k].i)] * m[static_cast<std::size_t>(pairs[k].j)]);
  return acc;
}

}  // namespace detail

inline constexpr int kJackknifeBlocks = 50;

/// xi_z^2 = sum_{pairs} |r_i - r_j|^2 (<z_i z_j> - <z_i><z_j>) with all moments from the same
/// samples; error bar from a block jackknife.
inline Estimate correlation_length_sq(const OutcomeDataset& ds, const SpinLattice& lattice, SiteSubset subset,
                                      const PovmSpec& povm, int blocks = kJackknifeBlocks) {
  require(ds.n_qubits == lattice.n_qubits(), "dataset and lattice disagree on the site count");
  const auto pairs = correlation_pairs(lattice, subset);
  const Eigen::VectorXd z = povm.representation(pauli::z());
  const std::size_t ns = ds.size(), n = static_cast<std::size_t>(ds.n_qubits), P = pairs.size();
  require(ns >= 2, "need at least two samples");
  const int B = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(blocks), ns));

  std::vector<std::vector<double>> bm(static_cast<std::size_t>(B), std::vector<double>(n, 0.0));
  std::vector<std::vector<double>> bc(static_cast<std::size_t>(B), std::vector<double>(P, 0.0));
  std::vector<std::size_t> bcount(static_cast<std::size_t>(B), 0);
  for (std::size_t s = 0; s < ns; ++s) {
    const auto blk = static_cast<std::size_t>(s * static_cast<std::size_t>(B) / ns);
    const auto a = ds.sample(s);
    for (std::size_t i = 0; i < n; ++i) bm[blk][i] += z(a[i]);
    for (std::size_t k = 0; k < P; ++k)
      bc[blk][k] += z(a[static_cast<std::size_t>(pairs[k].i)]) * z(a[static_cast<std::size_t>(pairs[k].j)]);
    ++bcount[blk];
  }
  std::vector<double> tm(n, 0.0), tc(P, 0.0);
  for (int b = 0; b < B; ++b) {
    for (std::size_t i = 0; i < n; ++i) tm[i] += bm[static_cast<std::size_t>(b)][i];
    for (std::size_t k = 0; k < P; ++k) tc[k] += bc[static_cast<std::size_t>(b)][k];
  }
  auto theta = [&](int skip) {
    const double cnt = static_cast<double>(ns - (skip < 0 ? 0 : bcount[static_cast<std::size_t>(skip)]));
    std::vector<double> m(n), c(P);
    for (std::size_t i = 0; i < n; ++i) m[i] = (tm[i] - (skip < 0 ? 0.0 : bm[static_cast<std::size_t>(skip)][i])) / cnt;
    for (std::size_t k = 0; k < P; ++k) c[k] = (tc[k] - (skip < 0 ? 0.0 : bc[static_cast<std::size_t>(skip)][k])) / cnt;
    return detail::xi_from_moments(pairs, m, c);
  };
  const double full = theta(-1);
  std::vector<double> loo(static_cast<std::size_t>(B));
  double mean = 0.0;
  for (int b = 0; b < B; ++b) mean += (loo[static_cast<std::size_t>(b)] = theta(b)) / B;
  double var = 0.0;
  for (double v : loo) var += (v - mean) * (v - mean);
  var *= static_cast<double>(B - 1) / B;
  return {full, std::sqrt(var)};
}

inline double exact_correlation_length_sq(const Target& t, const SpinLattice& lattice, SiteSubset subset) {
  const auto pairs = correlation_pairs(lattice, subset);
  const int n = lattice.n_qubits();
  std::vector<double> m(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int s[] = {i};
    m[static_cast<std::size_t>(i)] = z_string_expectation(t, s);
  }
  std::vector<double> c(pairs.size());
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const int s[] = {pairs[k].i, pairs[k].j};
    c[k] = z_string_expectation(t, s);
  }
  return detail::xi_from_moments(pairs, m, c);
}

/// 1 - sum_a sqrt(P_a Q_a).
inline double classical_infidelity(const std::vector<double>& P, const std::vector<double>& Q) {
  require(P.size() == Q.size(), "distributions have different lengths");
  double sp = 0.0, sq = 0.0, bc = 0.0;
  for (std::size_t i = 0; i < P.size(); ++i) {
    require(P[i] >= -1e-12 && Q[i] >= -1e-12, "distributions must be nonnegative");
    sp += P[i];
    sq += Q[i];
    bc += std::sqrt(std::max(P[i], 0.0) * std::max(Q[i], 0.0));
  }
  require(std::abs(sp - 1.0) < 1e-6 && std::abs(sq - 1.0) < 1e-6, "distributions must sum to 1");
  return std::clamp(1.0 - bc, 0.0, 1.0);
}

struct RmsDecomposition {
  double rms = 0.0;
  double bias = 0.0;      // mean(estimate) - truth
  double variance = 0.0;  // population variance over the repetitions
};

/// sqrt(mean((estimate - truth)^2)); rms^2 = bias^2 + variance exactly.
inline RmsDecomposition rms_decomposition(const std::vector<double>& estimates, double truth) {
  require(estimates.size() >= 2, "RMS error needs at least two repetitions");
  const double n = static_cast<double>(estimates.size());
  double mean = 0.0, ms = 0.0;
  for (double e : estimates) {
    mean += e / n;
    ms += (e - truth) * (e - truth) / n;
  }
  double var = 0.0;
  for (double e : estimates) var += (e - mean) * (e - mean) / n;
  return {std::sqrt(ms), mean - truth, var};
}

inline double rms_error(const std::vector<double>& estimates, double truth) {
  return rms_decomposition(estimates, truth).rms;
}

}  // namespace nqst
