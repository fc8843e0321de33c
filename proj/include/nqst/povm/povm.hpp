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
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nqst/error.hpp"
#include "nqst/quantum/lattice.hpp"
#include "nqst/quantum/states.hpp"

namespace nqst {

using Mat2 = Eigen::Matrix2cd;

namespace pauli {
inline Mat2 identity() { return Mat2::Identity(); }
inline Mat2 x() { Mat2 m; m << 0, 1, 1, 0; return m; }
inline Mat2 y() { Mat2 m; m << 0, cplx(0, -1), cplx(0, 1), 0; return m; }
inline Mat2 z() { Mat2 m; m << 1, 0, 0, -1; return m; }
}  // namespace pauli

/// A single-qubit informationally complete POVM, applied identically to every site.
struct PovmSpec {
  int n_outcomes = 4;
  std::vector<Mat2> elements;
  Eigen::MatrixXd overlap;          ///< T_{aa'} = Tr[M_a M_a']
  Eigen::MatrixXd overlap_inverse;  ///< T^{-1}
  double condition_number = 0.0;
  bool flipped = false;

  /// Eigen-decomposition of each element, used by the sequential Born-rule sampler.
  struct Branch {
    double sqrt_weight;
    Eigen::Vector2cd vector;
  };
  std::vector<std::vector<Branch>> branches;

  std::string id() const { return flipped ? "pauli4-flipped" : "pauli4"; }
  std::uint32_t code() const { return flipped ? 1u : 0u; }

  /// Tr[M_a X] for a single-site operator X.
  Eigen::VectorXd traces(const Mat2& X) const {
    Eigen::VectorXd v(n_outcomes);
    for (int a = 0; a < n_outcomes; ++a) v(a) = (elements[static_cast<std::size_t>(a)] * X).trace().real();
    return v;
  }

  /// POVM representation coefficients of a single-site operator: O_a = sum_a' T^-1_{aa'} Tr[M_a' O].
  Eigen::VectorXd representation(const Mat2& O) const { return overlap_inverse * traces(O); }
};

namespace detail {

inline void finish_povm(PovmSpec& p) {
  const int K = p.n_outcomes;
  p.overlap.resize(K, K);
  for (int a = 0; a < K; ++a)
    for (int b = 0; b < K; ++b)
      p.overlap(a, b) = (p.elements[static_cast<std::size_t>(a)] * p.elements[static_cast<std::size_t>(b)]).trace().real();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(p.overlap);
  const auto& sv = svd.singularValues();
  p.condition_number = sv(0) / sv(sv.size() - 1);
  if (!(sv(sv.size() - 1) > 1e-12)) throw ConfigError("POVM overlap matrix is singular");
  p.overlap_inverse = p.overlap.inverse();

  p.branches.clear();
  for (const auto& M : p.elements) {
    Eigen::SelfAdjointEigenSolver<Mat2> es(M);
    std::vector<PovmSpec::Branch> br;
    for (int k = 0; k < 2; ++k) {
      const double lam = es.eigenvalues()(k);
      if (lam < -1e-12) throw ConfigError("POVM element is not positive semidefinite");
      if (lam > 1e-14) br.push_back({std::sqrt(lam), es.eigenvectors().col(k)});
    }
    p.branches.push_back(std::move(br));
  }
}

}  // namespace detail

/// {M_0,1,2 = 1/3 |up_{x,y,z}><up_{x,y,z}|, M_3 = 1 - M_0 - M_1 - M_2}; the flipped variant uses
/// the down projectors of the same three bases.
inline PovmSpec pauli4(bool flipped = false) {
  PovmSpec p;
  p.n_outcomes = 4;
  p.flipped = flipped;
  const double sign = flipped ? -1.0 : 1.0;
  const Mat2 I = pauli::identity();
  for (const Mat2& sigma : {pauli::x(), pauli::y(), pauli::z()})
    p.elements.push_back((I + sign * sigma) / 6.0);  // (1/3) * (1 +- sigma)/2
  p.elements.push_back(I - p.elements[0] - p.elements[1] - p.elements[2]);
  detail::finish_povm(p);
  return p;
}

inline PovmSpec povm_from_code(std::uint32_t code) {
  if (code > 1) throw ConfigError("unknown POVM code " + std::to_string(code));
  return pauli4(code == 1);
}

inline PovmSpec povm_from_id(const std::string& id) {
  if (id == "pauli4") return pauli4(false);
  if (id == "pauli4-flipped") return pauli4(true);
  throw ConfigError("unknown POVM '" + id + "'");
}

// ---------------------------------------------------------------------------------------------
// Factorized per-site transforms between operator space and outcome space.
//
// An operator X on N qubits is laid out "site-interleaved": index sum_i (2 r_i + c_i) 4^{N-1-i}
// holds X[r, c]. Outcome strings use index sum_i a_i 4^{N-1-i}. A per-site linear map is then
// a 4x4 matrix applied along each axis in turn.
// ---------------------------------------------------------------------------------------------

inline std::size_t pow4(int n) { return std::size_t{1} << (2 * n); }

inline std::size_t outcome_index(std::span<const std::uint8_t> outcome) {
  std::size_t idx = 0;
  for (auto a : outcome) idx = idx * 4 + a;
  return idx;
}

inline void outcome_from_index(std::size_t idx, std::span<std::uint8_t> out) {
  for (std::size_t i = out.size(); i-- > 0;) {
    out[i] = static_cast<std::uint8_t>(idx & 3u);
    idx >>= 2;
  }
}

namespace detail {

/// Applies `map` (4x4, out x in) along every one of the n axes of a 4^n array.
template <class Scalar, class MapScalar>
std::vector<Scalar> apply_per_site(std::vector<Scalar> data, const Eigen::Matrix<MapScalar, 4, 4>& map, int n) {
  std::vector<Scalar> tmp(data.size());
  for (int site = 0; site < n; ++site) {
    const std::size_t stride = pow4(n - 1 - site);
    const std::size_t block = stride * 4;
    for (std::size_t base = 0; base < data.size(); base += block)
      for (std::size_t off = 0; off < stride; ++off) {
        Scalar in[4];
        for (int k = 0; k < 4; ++k) in[k] = data[base + off + static_cast<std::size_t>(k) * stride];
        for (int o = 0; o < 4; ++o) {
          Scalar acc{};
          for (int k = 0; k < 4; ++k) acc += map(o, k) * in[k];
          tmp[base + off + static_cast<std::size_t>(o) * stride] = acc;
        }
      }
    data.swap(tmp);
  }
  return data;
}

inline std::size_t interleave(std::size_t r, std::size_t c, int n) {
  std::size_t idx = 0;
  for (int i = 0; i < n; ++i) {
    const int bit = n - 1 - i;
    idx = idx * 4 + 2 * ((r >> bit) & 1u) + ((c >> bit) & 1u);
  }
  return idx;
}

inline std::vector<cplx> interleaved(const CMatrix& X) {
  const int n = qubits_for_dimension(X.rows());
  std::vector<cplx> out(pow4(n));
  for (Eigen::Index r = 0; r < X.rows(); ++r)
    for (Eigen::Index c = 0; c < X.cols(); ++c)
      out[interleave(static_cast<std::size_t>(r), static_cast<std::size_t>(c), n)] = X(r, c);
  return out;
}

inline CMatrix deinterleaved(const std::vector<cplx>& v, int n) {
  const auto dim = Eigen::Index{1} << n;
  CMatrix X(dim, dim);
  for (Eigen::Index r = 0; r < dim; ++r)
    for (Eigen::Index c = 0; c < dim; ++c)
      X(r, c) = v[interleave(static_cast<std::size_t>(r), static_cast<std::size_t>(c), n)];
  return X;
}

/// Map (r,c) -> a with coefficient M_a[c, r], so that the transformed array equals Tr[X M_a].
inline Eigen::Matrix<cplx, 4, 4> trace_map(const PovmSpec& p) {
  Eigen::Matrix<cplx, 4, 4> A;
  for (int a = 0; a < 4; ++a)
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c) A(a, 2 * r + c) = p.elements[static_cast<std::size_t>(a)](c, r);
  return A;
}

/// Map a -> (r,c) with coefficient M_a[r, c]: builds sum_a w_a M_a.
inline Eigen::Matrix<cplx, 4, 4> synthesis_map(const PovmSpec& p) {
  Eigen::Matrix<cplx, 4, 4> A;
  for (int a = 0; a < 4; ++a)
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c) A(2 * r + c, a) = p.elements[static_cast<std::size_t>(a)](r, c);
  return A;
}

}  // namespace detail

inline constexpr int kEnumerationQubitCap = 10;

/// Tr[X M_{a_1} (x) ... (x) M_{a_N}] for every outcome string.
inline std::vector<cplx> povm_traces(const CMatrix& X, const PovmSpec& povm) {
  const int n = qubits_for_dimension(X.rows());
  return detail::apply_per_site(detail::interleaved(X), detail::trace_map(povm), n);
}

/// sum_a w_a M_{a_1} (x) ... (x) M_{a_N} for a weight per outcome string.
inline CMatrix povm_synthesis(const std::vector<cplx>& weights, const PovmSpec& povm, int n) {
  return detail::deinterleaved(detail::apply_per_site(weights, detail::synthesis_map(povm), n), n);
}

namespace detail {
inline std::vector<double> real_parts(const std::vector<cplx>& v) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i].real();
  return out;
}

inline std::vector<double> mixed_distribution(int n, const PovmSpec& povm) {
  std::vector<double> single(4);
  for (int a = 0; a < 4; ++a) single[static_cast<std::size_t>(a)] = povm.elements[static_cast<std::size_t>(a)].trace().real() / 2.0;
  std::vector<double> out(pow4(n), 1.0);
  for (std::size_t idx = 0; idx < out.size(); ++idx) {
    std::size_t k = idx;
    for (int i = 0; i < n; ++i) {
      out[idx] *= single[k & 3u];
      k >>= 2;
    }
  }
  return out;
}
}  // namespace detail

/// Born-rule outcome distribution P(a) = Tr[rho M_a], indexed by `outcome_index`.
inline std::vector<double> exact_distribution(const Target& state, const PovmSpec& povm,
                                              int max_qubits = kEnumerationQubitCap) {
  const int n = n_qubits(state);
  if (n > max_qubits)
    throw ConfigError("exact POVM distribution limited to " + std::to_string(max_qubits) + " qubits");
  return std::visit(
      [&](const auto& s) -> std::vector<double> {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, PureState>) {
          return detail::real_parts(povm_traces(s.amplitudes * s.amplitudes.adjoint(), povm));
        } else if constexpr (std::is_same_v<S, DensityMatrix>) {
          return detail::real_parts(povm_traces(s.entries, povm));
        } else if constexpr (std::is_same_v<S, StateEnsemble>) {
          std::vector<double> acc(pow4(n), 0.0);
          for (std::size_t k = 0; k < s.members.size(); ++k) {
            const auto& a = s.members[k].amplitudes;
            const auto part = detail::real_parts(povm_traces(a * a.adjoint(), povm));
            for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += s.weights[k] * part[i];
          }
          return acc;
        } else {
          const auto& a = s.pure.amplitudes;
          auto pure = detail::real_parts(povm_traces(a * a.adjoint(), povm));
          const auto mixed = detail::mixed_distribution(n, povm);
          for (std::size_t i = 0; i < pure.size(); ++i) pure[i] = (1.0 - s.p) * pure[i] + s.p * mixed[i];
          return pure;
        }
      },
      state);
}

/// Linear inversion rho = sum_a P(a) T^-1_{aa'} M_a' applied per site.
inline CMatrix reconstruct_from_distribution(const std::vector<double>& P, const PovmSpec& povm, int n) {
  Eigen::Matrix4d Tinv = povm.overlap_inverse;
  std::vector<double> coeffs = detail::apply_per_site(P, Eigen::Matrix4d(Tinv.transpose()), n);
  std::vector<cplx> w(coeffs.begin(), coeffs.end());
  return povm_synthesis(w, povm, n);
}

/// A Hermitian operator acting on an ordered set of distinct sites.
struct LocalObservable {
  std::vector<int> support;
  CMatrix op;

  LocalObservable() = default;
  LocalObservable(std::vector<int> sites, CMatrix o) : support(std::move(sites)), op(std::move(o)) {
    const auto k = static_cast<int>(support.size());
    if (op.rows() != (Eigen::Index{1} << k) || op.cols() != op.rows())
      throw ConfigError("observable matrix does not match its support size");
    if ((op - op.adjoint()).cwiseAbs().maxCoeff() > 1e-10)
      throw ConfigError("observable is not Hermitian");
    for (std::size_t i = 0; i < support.size(); ++i)
      for (std::size_t j = i + 1; j < support.size(); ++j)
        if (support[i] == support[j]) throw ConfigError("observable support has repeated sites");
  }

  /// Tensor product of single-site operators on the given sites.
  static LocalObservable product(std::vector<int> sites, const std::vector<Mat2>& ops) {
    if (sites.size() != ops.size()) throw ConfigError("one operator per site required");
    CMatrix m = CMatrix::Ones(1, 1);
    for (const auto& o : ops) {
      CMatrix next(m.rows() * 2, m.cols() * 2);
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) next.block<2, 2>(2 * r, 2 * c) = m(r, c) * o;
      m = std::move(next);
    }
    return {std::move(sites), m};
  }
  static LocalObservable z_string(std::vector<int> sites) {
    std::vector<Mat2> ops(sites.size(), pauli::z());
    return product(std::move(sites), ops);
  }
  int k() const { return static_cast<int>(support.size()); }

  void check_range(int n) const {
    for (int s : support)
      if (s < 0 || s >= n) throw ConfigError("observable support outside the system");
  }
};

/// Embeds a local observable into the full 2^N space (dense; for small-system checks).
inline CMatrix embed(const LocalObservable& obs, int n) {
  obs.check_range(n);
  const auto dim = Eigen::Index{1} << n;
  CMatrix full = CMatrix::Zero(dim, dim);
  const int k = obs.k();
  auto local_index = [&](std::size_t s) {
    std::size_t idx = 0;
    for (int j = 0; j < k; ++j) idx = idx * 2 + (spin_up(s, n, obs.support[static_cast<std::size_t>(j)]) ? 0 : 1);
    return idx;
  };
  std::size_t support_mask = 0;
  for (int s : obs.support) support_mask |= site_mask(n, s);
  for (Eigen::Index r = 0; r < dim; ++r)
    for (Eigen::Index c = 0; c < dim; ++c) {
      if ((static_cast<std::size_t>(r) & ~support_mask) != (static_cast<std::size_t>(c) & ~support_mask)) continue;
      full(r, c) = obs.op(static_cast<Eigen::Index>(local_index(static_cast<std::size_t>(r))),
                          static_cast<Eigen::Index>(local_index(static_cast<std::size_t>(c))));
    }
  return full;
}

inline constexpr int kRepresentationSiteCap = 8;

/// Lookup table O_a over the 4^k outcome strings of the observable's support.
struct ObservableRepresentation {
  std::vector<int> support;
  std::vector<double> values;

  /// Estimator value for a full outcome string: the table entry at its restriction.
  double operator()(std::span<const std::uint8_t> outcome) const {
    std::size_t idx = 0;
    for (int s : support) idx = idx * 4 + outcome[static_cast<std::size_t>(s)];
    return values[idx];
  }
};

inline ObservableRepresentation observable_povm_representation(const LocalObservable& obs,
                                                               const PovmSpec& povm) {
  if (obs.k() > kRepresentationSiteCap)
    throw ConfigError("observable support exceeds " + std::to_string(kRepresentationSiteCap) + " sites");
  const int k = obs.k();
  const auto traces = detail::real_parts(povm_traces(obs.op, povm));
  Eigen::Matrix4d Tinv = povm.overlap_inverse;
  return {obs.support, detail::apply_per_site(traces, Tinv, k)};
}

/// Product observables factorize: O_a = prod_i (O_i)_{a_i}. Any support size.
struct ProductRepresentation {
  std::vector<int> support;
  std::vector<std::array<double, 4>> factors;

  double operator()(std::span<const std::uint8_t> outcome) const {
    double v = 1.0;
    for (std::size_t j = 0; j < support.size(); ++j)
      v *= factors[j][outcome[static_cast<std::size_t>(support[j])]];
    return v;
  }
};

inline ProductRepresentation product_representation(std::vector<int> sites,
                                                    const std::vector<Mat2>& ops,
                                                    const PovmSpec& povm) {
  if (sites.size() != ops.size()) throw ConfigError("one operator per site required");
  ProductRepresentation rep{std::move(sites), {}};
  for (const auto& o : ops) {
    const Eigen::VectorXd r = povm.representation(o);
    rep.factors.push_back({r(0), r(1), r(2), r(3)});
  }
  return rep;
}

inline ProductRepresentation z_string_representation(std::vector<int> sites, const PovmSpec& povm) {
  std::vector<Mat2> ops(sites.size(), pauli::z());
  return product_representation(std::move(sites), ops, povm);
}

}  // namespace nqst
