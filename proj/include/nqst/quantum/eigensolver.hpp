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
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "nqst/error.hpp"
#include "nqst/quantum/lattice.hpp"
#include "nqst/quantum/states.hpp"
#include "nqst/random.hpp"

namespace nqst {

struct EigensolverOptions {
  std::size_t dense_threshold = std::size_t{1} << 12;  ///< dimensions below this use dense diagonalization
  std::size_t max_dimension = std::size_t{1} << 20;
  int krylov_dim = 120;
  int max_restarts = 60;
  double residual_tol = 1e-10;
  std::uint64_t seed = 12345;
};

struct GroundStateResult {
  double energy = 0.0;
  PureState state;
  double residual = 0.0;  ///< ||H psi - E psi||
  int matvecs = 0;
};

inline double eigen_residual(const SparseOperator& H, const CVector& v, double energy) {
  return (H * v - energy * v).norm();
}

inline GroundStateResult dense_ground_state(const SparseOperator& H) {
  const CMatrix dense = CMatrix(H);
  Eigen::SelfAdjointEigenSolver<CMatrix> es(dense);
  if (es.info() != Eigen::Success) throw NumericalError("dense eigensolver failed");
  GroundStateResult out;
  out.energy = es.eigenvalues()(0);
  out.state = PureState::normalized(es.eigenvectors().col(0));
  out.residual = eigen_residual(H, out.state.amplitudes, out.energy);
  return out;
}

/// Explicitly restarted Lanczos with full reorthogonalization. The start vector is a
/// positive random vector symmetrized under the global spin flip, plus a small generic
/// component; for stoquastic Ising Hamiltonians this keeps the iteration inside the sector
/// holding the unique ground state even when a quasi-degenerate partner exists.
inline GroundStateResult lanczos_ground_state(const SparseOperator& H,
                                              const EigensolverOptions& opt = {}) {
  const Eigen::Index dim = H.rows();
  if (dim == 0) throw ConfigError("empty operator");
  Rng rng = make_stream(opt.seed, StreamTag::misc);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  CVector start(dim);
  for (Eigen::Index i = 0; i < dim; ++i) start(i) = u(rng);
  for (Eigen::Index i = 0; i < dim / 2; ++i) {
    const Eigen::Index j = dim - 1 - i;  // bitwise complement of i
    const cplx avg = 0.5 * (start(i) + start(j));
    start(i) = start(j) = avg;
  }
  for (Eigen::Index i = 0; i < dim; ++i) start(i) += 1e-3 * cplx(u(rng) - 0.5, u(rng) - 0.5);
  start.normalize();

  const int m_max = static_cast<int>(std::min<Eigen::Index>(opt.krylov_dim, dim));
  GroundStateResult out;
  CVector ritz = start;
  double theta = 0.0;
  for (int restart = 0; restart <= opt.max_restarts; ++restart) {
    std::vector<CVector> basis;
    basis.reserve(static_cast<std::size_t>(m_max));
    std::vector<double> alpha, beta;
    basis.push_back(ritz);
    CVector w;
    for (int j = 0; j < m_max; ++j) {
      w = H * basis[static_cast<std::size_t>(j)];
      ++out.matvecs;
      alpha.push_back(basis[static_cast<std::size_t>(j)].dot(w).real());
      // Two passes of classical Gram-Schmidt against the whole basis.
      for (int pass = 0; pass < 2; ++pass)
        for (const auto& q : basis) w -= q.dot(w) * q;
      const double b = w.norm();
      if (j + 1 == m_max || b < 1e-14) break;
      beta.push_back(b);
      basis.push_back(w / b);
    }
    const int m = static_cast<int>(alpha.size());
    Eigen::VectorXd diag = Eigen::Map<Eigen::VectorXd>(alpha.data(), m);
    Eigen::VectorXd sub = m > 1 ? Eigen::VectorXd(Eigen::Map<Eigen::VectorXd>(beta.data(), m - 1))
                                : Eigen::VectorXd();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tri;
    tri.computeFromTridiagonal(diag, sub);
    theta = tri.eigenvalues()(0);
    const Eigen::VectorXd y = tri.eigenvectors().col(0);
    ritz = CVector::Zero(dim);
    for (int k = 0; k < m; ++k) ritz += y(k) * basis[static_cast<std::size_t>(k)];
    ritz.normalize();
    out.residual = eigen_residual(H, ritz, theta);
    ++out.matvecs;
    if (out.residual < opt.residual_tol || m < m_max) break;
  }
  // Rayleigh quotient of the final vector is the most accurate energy estimate.
  out.energy = ritz.dot(H * ritz).real();
  out.residual = eigen_residual(H, ritz, out.energy);
  if (!(out.residual < 1e3 * opt.residual_tol))
    throw NumericalError("Lanczos did not converge: residual " + std::to_string(out.residual));
  out.state = PureState::normalized(ritz);
  return out;
}

/// Normalized eigenvector of the smallest eigenvalue. Dense below the threshold.
inline GroundStateResult ground_state(const SparseOperator& H, const EigensolverOptions& opt = {}) {
  const auto dim = static_cast<std::size_t>(H.rows());
  if (dim > opt.max_dimension) throw ConfigError("operator dimension exceeds eigensolver cap");
  if (dim < opt.dense_threshold) return dense_ground_state(H);
  return lanczos_ground_state(H, opt);
}

}  // namespace nqst
