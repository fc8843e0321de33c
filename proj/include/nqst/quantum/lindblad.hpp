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
#include <string>
#include <vector>

#include <Eigen/SVD>
#include <Eigen/SparseLU>
#include <Eigen/SparseQR>
#include <unsupported/Eigen/KroneckerProduct>

#include "nqst/error.hpp"
#include "nqst/quantum/lattice.hpp"
#include "nqst/quantum/states.hpp"
#include "nqst/random.hpp"

namespace nqst {

/// Ising Hamiltonian plus spontaneous decay L_j = sigma^-_j on every site at rate gamma.
struct LindbladSpec {
  SpinLattice lattice;
  IsingCoupling coupling;
  double gamma = 1.0;

  void validate() const { require(gamma >= 0.0, "decay rate gamma must be nonnegative"); }
  int n_qubits() const { return lattice.n_qubits(); }
};

/// sigma^- = |down><up| on one site as a sparse operator on the full space.
inline SparseOperator lowering_operator(int n, int site) {
  const std::size_t dim = std::size_t{1} << n;
  std::vector<Eigen::Triplet<cplx>> trips;
  for (std::size_t s = 0; s < dim; ++s)
    if (spin_up(s, n, site))
      trips.emplace_back(static_cast<Eigen::Index>(s | site_mask(n, site)),
                         static_cast<Eigen::Index>(s), 1.0);
  SparseOperator L(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  L.setFromTriplets(trips.begin(), trips.end());
  return L;
}

/// d rho / dt for the given density matrix (dense evaluation; used for residual checks).
inline CMatrix apply_liouvillian(const LindbladSpec& spec, const CMatrix& rho) {
  const int n = spec.n_qubits();
  const SparseOperator H = build_ising_hamiltonian(spec.lattice, spec.coupling);
  const cplx I(0.0, 1.0);
  CMatrix out = -I * (H * rho - rho * H);
  for (int j = 0; j < n; ++j) {
    const SparseOperator L = lowering_operator(n, j);
    const SparseOperator LdL = SparseOperator(L.adjoint()) * L;
    const CMatrix LrL = L * rho * CMatrix(L.adjoint());
    out += spec.gamma * (LrL - 0.5 * (LdL * rho + rho * LdL));
  }
  return out;
}

/// Vectorized Liouvillian acting on column-stacked vec(rho), vec(AXB) = (B^T kron A) vec(X).
inline Eigen::SparseMatrix<cplx> vectorized_liouvillian(const LindbladSpec& spec) {
  using Sp = Eigen::SparseMatrix<cplx>;
  const int n = spec.n_qubits();
  const auto dim = Eigen::Index{1} << n;
  Sp Id(dim, dim);
  Id.setIdentity();
  const Sp H = Sp(build_ising_hamiltonian(spec.lattice, spec.coupling));
  const cplx I(0.0, 1.0);
  Sp Lv = Sp(Eigen::kroneckerProduct(Id, H)) - Sp(Eigen::kroneckerProduct(Sp(H.transpose()), Id));
  Lv = -I * Lv;
  for (int j = 0; j < n; ++j) {
    const Sp L = Sp(lowering_operator(n, j));
    const Sp LdL = Sp(L.adjoint()) * L;
    Sp term = Sp(Eigen::kroneckerProduct(Sp(L.conjugate()), L));
    term -= 0.5 * Sp(Eigen::kroneckerProduct(Id, LdL));
    term -= 0.5 * Sp(Eigen::kroneckerProduct(Sp(LdL.transpose()), Id));
    Lv += spec.gamma * term;
  }
  Lv.makeCompressed();
  return Lv;
}

inline constexpr int kSteadyStateQubitCap = 8;
inline constexpr int kDenseSteadyStateQubits = 4;

/// Null vector of the Liouvillian, reshaped to a Hermitian unit-trace density matrix.
/// Up to four qubits this uses a dense SVD and reports a degenerate null space; above that
/// one equation is replaced by the trace condition and the sparse system is solved by LU.
inline DensityMatrix exact_steady_state(const LindbladSpec& spec) {
  spec.validate();
  const int n = spec.n_qubits();
  if (n > kSteadyStateQubitCap)
    throw ConfigError("exact steady state is limited to " + std::to_string(kSteadyStateQubitCap) +
                      " qubits");
  const auto dim = Eigen::Index{1} << n;
  const auto Lv = vectorized_liouvillian(spec);
  CVector x;
  if (n <= kDenseSteadyStateQubits) {
    Eigen::JacobiSVD<CMatrix> svd(CMatrix(Lv), Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const Eigen::Index last = sv.size() - 1;
    const double scale = std::max(sv(0), 1.0);
    if (last > 0 && sv(last - 1) < 1e-9 * scale)
      warn("Liouvillian has a degenerate steady-state subspace; returning the vector of the "
           "smallest singular value");
    x = svd.matrixV().col(last);
  } else {
    Eigen::SparseMatrix<cplx, Eigen::RowMajor> A = Lv;
    // Row 0 (the equation for rho_00) is implied by the others through trace preservation.
    for (Eigen::SparseMatrix<cplx, Eigen::RowMajor>::InnerIterator it(A, 0); it; ++it) it.valueRef() = 0.0;
    A.prune(cplx(0.0));
    A.makeCompressed();
    Eigen::SparseMatrix<cplx> Ac = A;
    std::vector<Eigen::Triplet<cplx>> trace_row;
    for (Eigen::Index i = 0; i < dim; ++i) trace_row.emplace_back(0, i * (dim + 1), 1.0);
    Eigen::SparseMatrix<cplx> T(dim * dim, dim * dim);
    T.setFromTriplets(trace_row.begin(), trace_row.end());
    Ac += T;
    Ac.makeCompressed();
    CVector rhs = CVector::Zero(dim * dim);
    rhs(0) = 1.0;
    Eigen::SparseLU<Eigen::SparseMatrix<cplx>> lu;
    lu.compute(Ac);
    if (lu.info() == Eigen::Success) {
      x = lu.solve(rhs);
    } else {
      warn("Liouvillian has a degenerate steady-state subspace; using a least-squares solution");
      Eigen::SparseQR<Eigen::SparseMatrix<cplx>, Eigen::COLAMDOrdering<int>> qr;
      qr.compute(Ac);
      x = qr.solve(rhs);
    }
  }
  CMatrix rho = Eigen::Map<CMatrix>(x.data(), dim, dim);
  return DensityMatrix::cleaned(rho);
}

struct McwfOptions {
  double t_final = 20.0;
  double dt = 0.005;
  int n_trajectories = 1000;
  std::uint64_t seed = 0;
};

namespace detail {

/// Applies the non-Hermitian effective Hamiltonian H - (i gamma / 2) sum_j n_up(j).
struct EffectiveHamiltonian {
  const SparseOperator& H;
  Eigen::VectorXd up_count;
  double gamma;

  CVector operator()(const CVector& psi) const {
    CVector out = H * psi;
    out.array() -= cplx(0.0, 0.5 * gamma) * up_count.array() * psi.array();
    return out;
  }
};

}  // namespace detail

/// Monte-Carlo wave-function unfolding. Each step either applies one jump, chosen with
/// probability gamma * dt * <sum_j L_j^dag L_j>, or propagates under the effective
/// Hamiltonian with one RK4 step; the state is renormalized after every step.
inline PureState mcwf_single_trajectory(const LindbladSpec& spec, const SparseOperator& H,
                                        const McwfOptions& opt, std::uint64_t index) {
  const int n = spec.n_qubits();
  const std::size_t dim = std::size_t{1} << n;
  Eigen::VectorXd up_count(static_cast<Eigen::Index>(dim));
  for (std::size_t s = 0; s < dim; ++s) {
    int c = 0;
    for (int j = 0; j < n; ++j) c += spin_up(s, n, j) ? 1 : 0;
    up_count(static_cast<Eigen::Index>(s)) = c;
  }
  const detail::EffectiveHamiltonian Heff{H, up_count, spec.gamma};
  Rng rng = make_stream(opt.seed, StreamTag::trajectory, index);

  CVector psi = CVector::Zero(static_cast<Eigen::Index>(dim));
  psi(static_cast<Eigen::Index>(dim - 1)) = 1.0;  // all spins down
  const cplx I(0.0, 1.0);
  const auto steps = static_cast<long>(std::llround(opt.t_final / opt.dt));
  std::vector<double> site_up(static_cast<std::size_t>(n));
  for (long step = 0; step < steps; ++step) {
    double total_up = 0.0;
    std::fill(site_up.begin(), site_up.end(), 0.0);
    for (std::size_t s = 0; s < dim; ++s) {
      const double w = std::norm(psi(static_cast<Eigen::Index>(s)));
      if (w == 0.0) continue;
      for (int j = 0; j < n; ++j)
        if (spin_up(s, n, j)) site_up[static_cast<std::size_t>(j)] += w;
    }
    for (double v : site_up) total_up += v;
    const double jump_prob = spec.gamma * opt.dt * total_up;
    if (jump_prob > 0.0 && uniform01(rng) < jump_prob) {
      double r = uniform01(rng) * total_up;
      int site = n - 1;
      for (int j = 0; j < n; ++j) {
        r -= site_up[static_cast<std::size_t>(j)];
        if (r <= 0.0) { site = j; break; }
      }
      CVector next = CVector::Zero(psi.size());
      const std::size_t m = site_mask(n, site);
      for (std::size_t s = 0; s < dim; ++s)
        if ((s & m) == 0) next(static_cast<Eigen::Index>(s | m)) = psi(static_cast<Eigen::Index>(s));
      psi = std::move(next);
    } else {
      const CVector k1 = -I * Heff(psi);
      const CVector k2 = -I * Heff(psi + 0.5 * opt.dt * k1);
      const CVector k3 = -I * Heff(psi + 0.5 * opt.dt * k2);
      const CVector k4 = -I * Heff(psi + opt.dt * k3);
      psi += (opt.dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    const double norm = psi.norm();
    if (!(norm > 1e-150) || !std::isfinite(norm))
      throw NumericalError("trajectory norm underflow at step " + std::to_string(step) +
                           "; reduce dt");
    psi /= norm;
  }
  return PureState::normalized(psi);
}

inline StateEnsemble mcwf_trajectories(const LindbladSpec& spec, const McwfOptions& opt) {
  spec.validate();
  require(opt.t_final > 0.0, "t_final must be positive");
  require(opt.dt > 0.0, "dt must be positive");
  require(opt.n_trajectories > 0, "need at least one trajectory");
  const double fastest =
      std::max({std::abs(spec.coupling.field_B), std::abs(spec.coupling.J), spec.gamma});
  if (opt.dt * fastest > 0.1)
    warn("MCWF time step dt=" + std::to_string(opt.dt) + " does not resolve the fastest scale");
  const SparseOperator H = build_ising_hamiltonian(spec.lattice, spec.coupling);
  std::vector<PureState> members;
  members.reserve(static_cast<std::size_t>(opt.n_trajectories));
  for (int k = 0; k < opt.n_trajectories; ++k)
    members.push_back(mcwf_single_trajectory(spec, H, opt, static_cast<std::uint64_t>(k)));
  return StateEnsemble::equal_weights(std::move(members));
}

}  // namespace nqst
