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
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "nqst/error.hpp"

namespace nqst {

using cplx = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using SparseOperator = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;

/// Basis convention: site 0 is the most significant bit of a basis index and bit value 0 is
/// spin up, so sigma_z |up> = +|up>.
inline std::size_t site_mask(int n_qubits, int site) {
  return std::size_t{1} << static_cast<unsigned>(n_qubits - 1 - site);
}

inline bool spin_up(std::size_t basis_index, int n_qubits, int site) {
  return (basis_index & site_mask(n_qubits, site)) == 0;
}

inline double z_eigenvalue(std::size_t basis_index, int n_qubits, int site) {
  return spin_up(basis_index, n_qubits, site) ? 1.0 : -1.0;
}

enum class Geometry { chain, grid };
enum class Boundary { open, periodic };

struct SpinLattice {
  Geometry geometry = Geometry::chain;
  int rows = 1;
  int cols = 1;
  Boundary boundary = Boundary::open;

  static SpinLattice chain(int n, Boundary b = Boundary::open) {
    require(n > 0, "chain length must be positive");
    return {Geometry::chain, 1, n, b};
  }
  static SpinLattice grid(int rows, int cols, Boundary b = Boundary::open) {
    require(rows > 0 && cols > 0, "grid sides must be positive");
    return {Geometry::grid, rows, cols, b};
  }

  int n_qubits() const { return rows * cols; }
  int row(int site) const { return site / cols; }
  int col(int site) const { return site % cols; }
  int site(int r, int c) const { return r * cols + c; }

  /// Lattice coordinates in units of the lattice spacing (row-major for grids).
  std::array<double, 2> position(int site) const {
    return {static_cast<double>(row(site)), static_cast<double>(col(site))};
  }

  double distance_sq(int a, int b) const {
    const auto pa = position(a);
    const auto pb = position(b);
    return (pa[0] - pb[0]) * (pa[0] - pb[0]) + (pa[1] - pb[1]) * (pa[1] - pb[1]);
  }

  /// Nearest-neighbour bonds as ordered pairs (i < j), each listed once.
  std::vector<std::pair<int, int>> bonds() const {
    std::set<std::pair<int, int>> out;
    auto add = [&](int a, int b) {
      if (a != b) out.insert({std::min(a, b), std::max(a, b)});
    };
    const bool wrap = boundary == Boundary::periodic;
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        if (c + 1 < cols) add(site(r, c), site(r, c + 1));
        else if (wrap && cols > 1) add(site(r, c), site(r, 0));
        if (geometry == Geometry::grid) {
          if (r + 1 < rows) add(site(r, c), site(r + 1, c));
          else if (wrap && rows > 1) add(site(r, c), site(0, c));
        }
      }
    }
    return {out.begin(), out.end()};
  }

  std::string describe() const {
    std::string g = geometry == Geometry::chain ? "chain(" + std::to_string(cols) + ")"
                                                : "grid(" + std::to_string(rows) + "x" +
                                                      std::to_string(cols) + ")";
    return g + (boundary == Boundary::periodic ? ",periodic" : ",open");
  }
};

/// Transverse-field Ising couplings. `J` enters the pair couplings as J_ij = -J (nearest
/// neighbour) or J_ij = -J / |i-j|^alpha (long range, chains only); `field_B` multiplies
/// -sum_i sigma_x.
struct IsingCoupling {
  enum class Kind { nearest_neighbor, long_range };
  Kind kind = Kind::nearest_neighbor;
  double J = 1.0;
  double alpha = 0.0;
  double field_B = 1.0;

  static IsingCoupling nearest_neighbor(double J, double B) {
    return {Kind::nearest_neighbor, J, 0.0, B};
  }
  static IsingCoupling long_range(double J, double alpha, double B) {
    require(alpha > 0.0, "long-range exponent alpha must be positive");
    return {Kind::long_range, J, alpha, B};
  }
};

/// Symmetric, zero-diagonal coupling matrix J_ij.
inline Eigen::MatrixXd coupling_matrix(const SpinLattice& lattice, const IsingCoupling& coupling) {
  const int n = lattice.n_qubits();
  Eigen::MatrixXd Jij = Eigen::MatrixXd::Zero(n, n);
  if (coupling.kind == IsingCoupling::Kind::nearest_neighbor) {
    for (auto [i, j] : lattice.bonds()) {
      Jij(i, j) = -coupling.J;
      Jij(j, i) = -coupling.J;
    }
  } else {
    if (lattice.geometry != Geometry::chain)
      throw ConfigError("long-range couplings are only defined on chains");
    require(coupling.alpha > 0.0, "long-range exponent alpha must be positive");
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        double d = static_cast<double>(j - i);
        if (lattice.boundary == Boundary::periodic) d = std::min(d, static_cast<double>(n) - d);
        Jij(i, j) = Jij(j, i) = -coupling.J / std::pow(d, coupling.alpha);
      }
  }
  return Jij;
}

inline constexpr int kDefaultQubitCap = 20;

/// H = sum_{i<j} J_ij sz_i sz_j - B sum_i sx_i as a sparse 2^N x 2^N operator.
inline SparseOperator build_ising_hamiltonian(const SpinLattice& lattice,
                                              const IsingCoupling& coupling,
                                              int max_qubits = kDefaultQubitCap) {
  const int n = lattice.n_qubits();
  if (n > max_qubits)
    throw ConfigError("system of " + std::to_string(n) + " qubits exceeds cap of " +
                      std::to_string(max_qubits));
  if (lattice.geometry == Geometry::grid && coupling.kind != IsingCoupling::Kind::nearest_neighbor)
    throw ConfigError("grid lattices support only nearest-neighbour couplings");

  const Eigen::MatrixXd Jij = coupling_matrix(lattice, coupling);
  std::vector<std::pair<int, int>> pairs;
  std::vector<double> weights;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (Jij(i, j) != 0.0) {
        pairs.emplace_back(i, j);
        weights.push_back(Jij(i, j));
      }

  const std::size_t dim = std::size_t{1} << n;
  SparseOperator H(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  H.reserve(Eigen::VectorXi::Constant(static_cast<Eigen::Index>(dim), n + 1));
  for (std::size_t s = 0; s < dim; ++s) {
    double diag = 0.0;
    for (std::size_t p = 0; p < pairs.size(); ++p)
      diag += weights[p] * z_eigenvalue(s, n, pairs[p].first) * z_eigenvalue(s, n, pairs[p].second);
    for (int i = 0; i < n; ++i) {
      const std::size_t t = s ^ site_mask(n, i);
      if (coupling.field_B != 0.0 && t < s)
        H.insert(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t)) = -coupling.field_B;
    }
    if (diag != 0.0) H.insert(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s)) = diag;
    for (int i = n - 1; i >= 0; --i) {
      const std::size_t t = s ^ site_mask(n, i);
      if (coupling.field_B != 0.0 && t > s)
        H.insert(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t)) = -coupling.field_B;
    }
  }
  H.makeCompressed();
  return H;
}

/// Explicit one-site translation on a chain: (T psi)(s_0..s_{N-1}) = psi(s_{N-1}, s_0, ...).
inline SparseOperator chain_translation(int n) {
  const std::size_t dim = std::size_t{1} << n;
  SparseOperator Tr(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  std::vector<Eigen::Triplet<cplx>> trips;
  trips.reserve(dim);
  for (std::size_t s = 0; s < dim; ++s) {
    // Rotate the site labels by one: site i -> site i+1 (mod n).
    const std::size_t low = s & 1u;
    const std::size_t t = (s >> 1) | (low << (n - 1));
    trips.emplace_back(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(s), 1.0);
  }
  Tr.setFromTriplets(trips.begin(), trips.end());
  return Tr;
}

}  // namespace nqst
