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
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Eigenvalues>

#include "nqst/binary_io.hpp"
#include "nqst/error.hpp"
#include "nqst/quantum/lattice.hpp"

namespace nqst {

inline int qubits_for_dimension(Eigen::Index dim) {
  int n = 0;
  while ((Eigen::Index{1} << n) < dim) ++n;
  if ((Eigen::Index{1} << n) != dim) throw ConfigError("dimension is not a power of two");
  return n;
}

struct PureState {
  CVector amplitudes;

  PureState() = default;
  explicit PureState(CVector amps) : amplitudes(std::move(amps)) {
    if (std::abs(amplitudes.squaredNorm() - 1.0) > 1e-10)
      throw ConfigError("pure state is not normalized");
  }
  static PureState normalized(CVector amps) {
    const double norm = amps.norm();
    if (!(norm > 0.0)) throw NumericalError("cannot normalize a zero vector");
    return PureState(amps / norm);
  }
  /// Product of identical single-qubit states.
  static PureState product(int n, const Eigen::Vector2cd& site) {
    CVector amps = CVector::Ones(1);
    for (int i = 0; i < n; ++i) {
      CVector next(amps.size() * 2);
      for (Eigen::Index k = 0; k < amps.size(); ++k) {
        next(2 * k) = amps(k) * site(0);
        next(2 * k + 1) = amps(k) * site(1);
      }
      amps = std::move(next);
    }
    return PureState::normalized(amps);
  }
  int n_qubits() const { return qubits_for_dimension(amplitudes.size()); }
  std::size_t dimension() const { return static_cast<std::size_t>(amplitudes.size()); }
};

struct DensityMatrix {
  CMatrix entries;

  DensityMatrix() = default;
  explicit DensityMatrix(CMatrix rho) : entries(std::move(rho)) {
    if (entries.rows() != entries.cols()) throw ConfigError("density matrix must be square");
    if ((entries - entries.adjoint()).cwiseAbs().maxCoeff() > 1e-10)
      throw ConfigError("density matrix is not Hermitian");
    if (std::abs(entries.trace().real() - 1.0) > 1e-10 || std::abs(entries.trace().imag()) > 1e-10)
      throw ConfigError("density matrix does not have unit trace");
  }
  /// Hermitizes and trace-normalizes before validation; for numerically produced matrices.
  static DensityMatrix cleaned(CMatrix rho) {
    CMatrix h = 0.5 * (rho + rho.adjoint());
    const double tr = h.trace().real();
    if (!(std::abs(tr) > 0.0)) throw NumericalError("density matrix has zero trace");
    return DensityMatrix(h / tr);
  }
  static DensityMatrix from_pure(const PureState& psi) {
    return DensityMatrix(psi.amplitudes * psi.amplitudes.adjoint());
  }
  static DensityMatrix maximally_mixed(int n) {
    const auto dim = Eigen::Index{1} << n;
    return DensityMatrix(CMatrix::Identity(dim, dim) / static_cast<double>(dim));
  }
  int n_qubits() const { return qubits_for_dimension(entries.rows()); }
  std::size_t dimension() const { return static_cast<std::size_t>(entries.rows()); }

  double min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(entries, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
  }
};

struct StateEnsemble {
  std::vector<double> weights;
  std::vector<PureState> members;

  StateEnsemble() = default;
  StateEnsemble(std::vector<double> w, std::vector<PureState> m)
      : weights(std::move(w)), members(std::move(m)) {
    if (weights.size() != members.size() || members.empty())
      throw ConfigError("ensemble weights and members must be non-empty and of equal length");
    double total = 0.0;
    for (double x : weights) {
      if (x < 0.0) throw ConfigError("ensemble weights must be nonnegative");
      total += x;
    }
    if (std::abs(total - 1.0) > 1e-10) throw ConfigError("ensemble weights must sum to 1");
    for (const auto& m2 : members)
      if (m2.dimension() != members.front().dimension())
        throw ConfigError("ensemble members differ in dimension");
  }
  static StateEnsemble equal_weights(std::vector<PureState> m) {
    std::vector<double> w(m.size(), 1.0 / static_cast<double>(m.size()));
    return {std::move(w), std::move(m)};
  }
  int n_qubits() const { return members.front().n_qubits(); }
  std::size_t dimension() const { return members.front().dimension(); }

  DensityMatrix density_matrix() const {
    const auto d = static_cast<Eigen::Index>(dimension());
    CMatrix rho = CMatrix::Zero(d, d);
    for (std::size_t k = 0; k < members.size(); ++k)
      rho.noalias() += weights[k] * (members[k].amplitudes * members[k].amplitudes.adjoint());
    return DensityMatrix::cleaned(rho);
  }
};

/// rho = (1 - p) |psi><psi| + p * 1 / 2^N kept in symbolic form.
struct DephasedState {
  PureState pure;
  double p = 0.0;

  int n_qubits() const { return pure.n_qubits(); }
  std::size_t dimension() const { return pure.dimension(); }
  DensityMatrix density_matrix() const {
    const auto d = static_cast<Eigen::Index>(dimension());
    CMatrix rho = (1.0 - p) * (pure.amplitudes * pure.amplitudes.adjoint());
    rho += (p / static_cast<double>(d)) * CMatrix::Identity(d, d);
    return DensityMatrix::cleaned(rho);
  }
};

using Target = std::variant<PureState, DensityMatrix, StateEnsemble, DephasedState>;

inline int n_qubits(const Target& t) {
  return std::visit([](const auto& s) { return s.n_qubits(); }, t);
}

inline DensityMatrix to_density_matrix(const Target& t) {
  return std::visit(
      [](const auto& s) -> DensityMatrix {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, PureState>) return DensityMatrix::from_pure(s);
        else if constexpr (std::is_same_v<S, DensityMatrix>) return s;
        else return s.density_matrix();
      },
      t);
}

/// Partial trace keeping `keep` (in the given order) of an N-qubit operator.
inline CMatrix reduced_density_matrix(const CMatrix& rho, std::span<const int> keep) {
  const int n = qubits_for_dimension(rho.rows());
  std::vector<int> rest;
  for (int s = 0; s < n; ++s)
    if (std::find(keep.begin(), keep.end(), s) == keep.end()) rest.push_back(s);
  const int k = static_cast<int>(keep.size());
  if (k + static_cast<int>(rest.size()) != n) throw ConfigError("partial trace: repeated or invalid sites");
  auto compose = [&](std::size_t kept, std::size_t traced) {
    std::size_t idx = 0;
    for (int j = 0; j < k; ++j)
      if ((kept >> (k - 1 - j)) & 1u) idx |= site_mask(n, keep[static_cast<std::size_t>(j)]);
    for (std::size_t j = 0; j < rest.size(); ++j)
      if ((traced >> (rest.size() - 1 - j)) & 1u) idx |= site_mask(n, rest[j]);
    return static_cast<Eigen::Index>(idx);
  };
  const auto dk = Eigen::Index{1} << k;
  const std::size_t dr = std::size_t{1} << rest.size();
  CMatrix out = CMatrix::Zero(dk, dk);
  for (Eigen::Index r = 0; r < dk; ++r)
    for (Eigen::Index c = 0; c < dk; ++c)
      for (std::size_t t = 0; t < dr; ++t)
        out(r, c) += rho(compose(static_cast<std::size_t>(r), t), compose(static_cast<std::size_t>(c), t));
  return out;
}

inline constexpr int kDenseDephasingCap = 10;

/// Dephasing channel toward the maximally mixed state. Small systems come back as a dense
/// matrix; larger ones stay symbolic and are consumed directly by the POVM sampler.
inline Target dephase(const PureState& state, double p, int dense_cap = kDenseDephasingCap) {
  require(p >= 0.0 && p <= 1.0, "dephasing probability must lie in [0, 1]");
  DephasedState lazy{state, p};
  if (state.n_qubits() <= dense_cap) return lazy.density_matrix();
  return lazy;
}

/// Expectation of an operator diagonal in the z basis, given as a function of the basis index.
inline double diagonal_expectation(const Target& t,
                                   const std::function<double(std::size_t)>& diag) {
  auto from_pure = [&](const PureState& s) {
    double acc = 0.0;
    for (std::size_t i = 0; i < s.dimension(); ++i) acc += std::norm(s.amplitudes(static_cast<Eigen::Index>(i))) * diag(i);
    return acc;
  };
  return std::visit(
      [&](const auto& s) -> double {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, PureState>) {
          return from_pure(s);
        } else if constexpr (std::is_same_v<S, DensityMatrix>) {
          double acc = 0.0;
          for (Eigen::Index i = 0; i < s.entries.rows(); ++i)
            acc += s.entries(i, i).real() * diag(static_cast<std::size_t>(i));
          return acc;
        } else if constexpr (std::is_same_v<S, StateEnsemble>) {
          double acc = 0.0;
          for (std::size_t k = 0; k < s.members.size(); ++k) acc += s.weights[k] * from_pure(s.members[k]);
          return acc;
        } else {
          double trace = 0.0;
          for (std::size_t i = 0; i < s.dimension(); ++i) trace += diag(i);
          return (1.0 - s.p) * from_pure(s.pure) + s.p * trace / static_cast<double>(s.dimension());
        }
      },
      t);
}

/// <sz_{i1} sz_{i2} ...> for the listed sites.
inline double z_string_expectation(const Target& t, std::span<const int> sites) {
  const int n = n_qubits(t);
  std::size_t mask = 0;
  for (int s : sites) mask ^= site_mask(n, s);
  return diagonal_expectation(t, [mask](std::size_t i) {
    return (std::popcount(i & mask) % 2 == 0) ? 1.0 : -1.0;
  });
}

// ---------------------------------------------------------------------------------------------
// State files: "NQSS" | u16 version | u16 kind | u32 N | u32 reserved, then a kind-specific
// payload of little-endian complex64 amplitudes (float re, float im).
//   pure:      2^N amplitudes
//   density:   4^N entries, row-major
//   ensemble:  u64 count, then per member f64 weight + 2^N amplitudes
//   dephased:  f64 p, then 2^N amplitudes
// Loading renormalizes, since complex64 only keeps ~7 significant digits.
// ---------------------------------------------------------------------------------------------

enum class StateKind : std::uint16_t { pure = 0, density = 1, ensemble = 2, dephased = 3 };
inline constexpr std::uint16_t kStateFileVersion = 1;

namespace detail {
inline void write_amplitudes(std::ostream& out, const CVector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    io::write_le(out, static_cast<float>(v(i).real()));
    io::write_le(out, static_cast<float>(v(i).imag()));
  }
}
inline CVector read_amplitudes(std::istream& in, std::size_t count) {
  CVector v(static_cast<Eigen::Index>(count));
  for (std::size_t i = 0; i < count; ++i) {
    const float re = io::read_le<float>(in);
    const float im = io::read_le<float>(in);
    v(static_cast<Eigen::Index>(i)) = cplx(re, im);
  }
  return v;
}
}  // namespace detail

inline void save_state(const std::string& path, const Target& target) {
  auto out = io::open_for_write(path);
  io::write_magic(out, "NQSS");
  io::write_le<std::uint16_t>(out, kStateFileVersion);
  io::write_le<std::uint16_t>(out, static_cast<std::uint16_t>(target.index()));
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(n_qubits(target)));
  io::write_le<std::uint32_t>(out, 0);
  std::visit(
      [&](const auto& s) {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, PureState>) {
          detail::write_amplitudes(out, s.amplitudes);
        } else if constexpr (std::is_same_v<S, DensityMatrix>) {
          for (Eigen::Index r = 0; r < s.entries.rows(); ++r)
            detail::write_amplitudes(out, s.entries.row(r).transpose());
        } else if constexpr (std::is_same_v<S, StateEnsemble>) {
          io::write_le<std::uint64_t>(out, s.members.size());
          for (std::size_t k = 0; k < s.members.size(); ++k) {
            io::write_le<double>(out, s.weights[k]);
            detail::write_amplitudes(out, s.members[k].amplitudes);
          }
        } else {
          io::write_le<double>(out, s.p);
          detail::write_amplitudes(out, s.pure.amplitudes);
        }
      },
      target);
  if (!out) throw ConfigError("failed writing state file '" + path + "'");
}

inline Target load_state(const std::string& path) {
  auto in = io::open_for_read(path);
  io::expect_magic(in, "NQSS", path);
  const auto version = io::read_le<std::uint16_t>(in);
  if (version != kStateFileVersion) throw ConfigError(path + ": unsupported state file version");
  const auto kind = static_cast<StateKind>(io::read_le<std::uint16_t>(in));
  const auto n = io::read_le<std::uint32_t>(in);
  (void)io::read_le<std::uint32_t>(in);
  if (n == 0 || n > 30) throw ConfigError(path + ": implausible qubit count");
  const std::size_t dim = std::size_t{1} << n;
  switch (kind) {
    case StateKind::pure:
      return PureState::normalized(detail::read_amplitudes(in, dim));
    case StateKind::density: {
      CMatrix rho(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
      for (std::size_t r = 0; r < dim; ++r)
        rho.row(static_cast<Eigen::Index>(r)) = detail::read_amplitudes(in, dim).transpose();
      return DensityMatrix::cleaned(rho);
    }
    case StateKind::ensemble: {
      const auto count = io::read_le<std::uint64_t>(in);
      std::vector<double> w;
      std::vector<PureState> m;
      for (std::uint64_t k = 0; k < count; ++k) {
        w.push_back(io::read_le<double>(in));
        m.push_back(PureState::normalized(detail::read_amplitudes(in, dim)));
      }
      const double total = std::accumulate(w.begin(), w.end(), 0.0);
      for (double& x : w) x /= total;
      return StateEnsemble(std::move(w), std::move(m));
    }
    case StateKind::dephased: {
      const double p = io::read_le<double>(in);
      return DephasedState{PureState::normalized(detail::read_amplitudes(in, dim)), p};
    }
  }
  throw ConfigError(path + ": unknown state kind");
}

}  // namespace nqst
