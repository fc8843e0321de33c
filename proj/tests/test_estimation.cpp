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

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "nqst/estimation/estimators.hpp"
#include "nqst/povm/born_sampler.hpp"
#include "nqst/quantum/eigensolver.hpp"

using namespace nqst;
using Catch::Matchers::WithinAbs;

namespace {

CMatrix random_density_matrix(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  const auto d = Eigen::Index{1} << n;
  CMatrix A(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) A(i, j) = cplx(g(rng), g(rng));
  CMatrix rho = A * A.adjoint();
  return rho / rho.trace().real();
}

const Eigen::Vector2cd kUp(1.0, 0.0);

}  // namespace

TEST_CASE("observable estimates", "[estimation][statistical]") {
  const auto povm = pauli4();
  SECTION("sz on the all-up product state") {
    const auto ds = sample_outcomes(PureState::product(3, kUp), povm, 20000, 1);
    const auto e = estimate_observable(ds, LocalObservable::z_string({0}), povm);
    CHECK(std::abs(e.value - 1.0) < 4.0 * e.std_error);
  }
  SECTION("identity is exact") {
    const auto ds = sample_outcomes(PureState::product(3, kUp), povm, 1000, 2);
    const auto e = estimate_observable(ds, LocalObservable({1}, CMatrix::Identity(2, 2)), povm);
    CHECK(e.value == 1.0);
    CHECK(e.std_error == 0.0);
  }
  SECTION("random three-qubit state against the dense trace") {
    const CMatrix rho = random_density_matrix(3, 3);
    const auto ds = sample_outcomes(DensityMatrix(rho), povm, 100000, 4);
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g;
    CMatrix h(4, 4);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) h(i, j) = cplx(g(rng), g(rng));
    h = 0.5 * (h + h.adjoint().eval());
    for (const auto& o : {LocalObservable::z_string({2}), LocalObservable::z_string({0, 1}),
                          LocalObservable({2, 0}, h)}) {
      const auto e = estimate_observable(ds, o, povm);
      const double exact = (rho * embed(o, 3)).trace().real();
      INFO("estimate " << e.value << " +- " << e.std_error << " exact " << exact);
      CHECK(std::abs(e.value - exact) < 4.0 * e.std_error);
    }
  }
}

TEST_CASE("classical infidelity", "[estimation]") {
  CHECK(classical_infidelity({0.2, 0.3, 0.5}, {0.2, 0.3, 0.5}) == Catch::Approx(0.0).margin(1e-15));
  CHECK(classical_infidelity({1.0, 0.0}, {0.0, 1.0}) == 1.0);
  CHECK_THAT(classical_infidelity({1.0, 0.0}, {0.5, 0.5}), WithinAbs(1.0 - std::sqrt(0.5), 1e-15));
  const std::vector<double> p = {0.1, 0.6, 0.3}, q = {0.3, 0.3, 0.4};
  CHECK(classical_infidelity(p, q) == classical_infidelity(q, p));
  CHECK(classical_infidelity(p, q) > 0.0);
  CHECK_THROWS_AS(classical_infidelity({1.0}, {0.5, 0.5}), ConfigError);
}

TEST_CASE("correlator powers", "[estimation][statistical]") {
  const auto povm = pauli4();
  SECTION("all-up product state") {
    const auto psi = PureState::product(5, kUp);
    const auto ds = sample_outcomes(psi, povm, 100000, 6);
    for (int order = 1; order <= 5; ++order) {
      CHECK_THAT(exact_correlator_power(psi, order), WithinAbs(1.0, 1e-12));
      const auto e = correlator_powers(ds, order, povm);
      CHECK(std::abs(e.value - 1.0) < 4.0 * e.std_error);
    }
  }
  SECTION("maximally mixed state") {
    const auto ds = sample_outcomes(DensityMatrix::maximally_mixed(4), povm, 50000, 7);
    for (int order = 1; order <= 4; ++order) {
      const auto e = correlator_powers(ds, order, povm);
      CHECK(std::abs(e.value) < 4.0 * e.std_error);
    }
  }
  SECTION("TFIM ground state C_2") {
    const auto H = build_ising_hamiltonian(SpinLattice::chain(4, Boundary::periodic),
                                           IsingCoupling::nearest_neighbor(1.0, 1.0));
    const auto psi = ground_state(H).state;
    const auto ds = sample_outcomes(psi, povm, 100000, 8);
    const auto e = correlator_powers(ds, 2, povm);
    const double exact = exact_correlator_power(psi, 2);
    INFO(e.value << " +- " << e.std_error << " exact " << exact);
    CHECK(std::abs(e.value - exact) < 4.0 * e.std_error);
  }
}

TEST_CASE("correlation length", "[estimation]") {
  CHECK(correlation_pairs(SpinLattice::grid(4, 4), SiteSubset::main_diagonal).size() == 6);
  CHECK(correlation_pairs(SpinLattice::grid(4, 4), SiteSubset::full_lattice).size() == 120);
  CHECK_THROWS_AS(correlation_pairs(SpinLattice::chain(4), SiteSubset::full_lattice), ConfigError);
  const auto povm = pauli4();
  SECTION("product state has no connected correlations") {
    const auto lat = SpinLattice::grid(2, 3);
    const auto ds = sample_outcomes(PureState::product(6, Eigen::Vector2cd(0.6, 0.8)), povm, 50000, 9);
    const auto e = correlation_length_sq(ds, lat, SiteSubset::full_lattice, povm);
    CHECK(std::abs(e.value) < 4.0 * e.std_error);
  }
  SECTION("2x2 toy state against the dense value") {
    const auto lat = SpinLattice::grid(2, 2);
    CVector v = CVector::Zero(16);
    v(0) = 0.8;
    v(15) = 0.5;
    v(6) = 0.33;
    const auto psi = PureState::normalized(v);
    const double exact = exact_correlation_length_sq(psi, lat, SiteSubset::full_lattice);
    const auto ds = sample_outcomes(psi, povm, 100000, 10);
    const auto e = correlation_length_sq(ds, lat, SiteSubset::full_lattice, povm);
    INFO(e.value << " +- " << e.std_error << " exact " << exact);
    CHECK(std::abs(exact) > 0.5);
    CHECK(std::abs(e.value - exact) < 4.0 * e.std_error);
    const auto d = correlation_length_sq(ds, lat, SiteSubset::main_diagonal, povm);
    CHECK(std::abs(d.value - exact_correlation_length_sq(psi, lat, SiteSubset::main_diagonal)) < 4.0 * d.std_error);
  }
}

TEST_CASE("RMS error", "[estimation]") {
  CHECK(rms_error({2.0, 2.0, 2.0}, 2.0) == 0.0);
  CHECK_THAT(rms_error({1.5, 0.5, 1.5, 0.5}, 1.0), WithinAbs(0.5, 1e-15));
  CHECK_THROWS_AS(rms_error({1.0}, 1.0), ConfigError);
  const std::vector<double> e = {0.3, -0.1, 0.7, 0.25, 0.05};
  const auto d = rms_decomposition(e, 0.2);
  CHECK_THAT(d.rms * d.rms, WithinAbs(d.bias * d.bias + d.variance, 1e-15));

  SECTION("direct sampling is unbiased") {
    const auto povm = pauli4();
    const CMatrix rho = random_density_matrix(2, 11);
    const auto obs = LocalObservable::z_string({0});
    const double exact = (rho * embed(obs, 2)).trace().real();
    std::vector<double> reps;
    for (std::uint64_t r = 0; r < 20; ++r)
      reps.push_back(estimate_observable(sample_outcomes(DensityMatrix(rho), povm, 2000, 100 + r), obs, povm).value);
    const auto dec = rms_decomposition(reps, exact);
    INFO("bias " << dec.bias << " variance " << dec.variance);
    CHECK(dec.bias * dec.bias < dec.variance / 10.0);
  }
}
