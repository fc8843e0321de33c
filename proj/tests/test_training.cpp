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

#include "nqst/models/networks.hpp"
#include "nqst/nn/gradcheck.hpp"
#include "nqst/povm/born_sampler.hpp"
#include "nqst/quantum/eigensolver.hpp"
#include "nqst/training/train.hpp"

using namespace nqst;
using Catch::Matchers::WithinAbs;

namespace {

double entropy(const std::vector<double>& p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

double cross_entropy(const std::vector<double>& p, const std::vector<double>& q) {
  double h = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) h -= p[i] * std::log(q[i]);
  return h;
}

double kl(const std::vector<double>& p, const std::vector<double>& q) { return cross_entropy(p, q) - entropy(p); }

std::vector<double> site_marginal(const std::vector<double>& P, int n, int site) {
  std::vector<double> m(4, 0.0);
  std::vector<std::uint8_t> a(static_cast<std::size_t>(n));
  for (std::size_t idx = 0; idx < P.size(); ++idx) {
    outcome_from_index(idx, a);
    m[a[static_cast<std::size_t>(site)]] += P[idx];
  }
  return m;
}

PureState tfim_ground_state(int n) {
  const auto H = build_ising_hamiltonian(SpinLattice::chain(n, Boundary::periodic),
                                         IsingCoupling::nearest_neighbor(1.0, 1.0));
  return ground_state(H).state;
}

}  // namespace

TEST_CASE("loss values of the uniform model", "[training]") {
  const int n = 4;
  Rng rng = make_stream(1, StreamTag::misc);
  const auto data = uniform_outcomes(20, n, rng);
  const auto norm = uniform_outcomes(20, n, rng);
  const OutcomeBatch batch{data, n};
  {
    const auto s = ArchitectureSpec::arcnn(n, 2, 2, 3);
    nn::Graph g(false);
    CHECK_THAT(g.value(nll_loss_arcnn(g, g.bind(zero_params(s)), s, batch)).item(),
               WithinAbs(n * std::log(4.0), 1e-12));
  }
  {
    const auto s = ArchitectureSpec::cnn1d(n, 1, 2, 3, ConvBoundary::circular, OutputHead::product);
    nn::Graph g(false);
    CHECK_THAT(g.value(nll_loss_cnn(g, g.bind(zero_params(s)), s, batch, OutcomeBatch{norm, n})).item(),
               WithinAbs(n * std::log(4.0), 1e-12));
  }
}

TEST_CASE("arcnn loss is invariant under batch permutation", "[training]") {
  const int n = 5;
  const auto s = ArchitectureSpec::arcnn(n, 2, 3, 4);
  const auto p = init_params(s, 3);
  Rng rng = make_stream(2, StreamTag::misc);
  auto data = uniform_outcomes(30, n, rng);
  nn::Graph g(false);
  const double a = g.value(nll_loss_arcnn(g, g.bind(p), s, OutcomeBatch{data, n})).item();
  std::vector<std::uint8_t> rev(data.size());
  for (std::size_t b = 0; b < 30; ++b)
    std::copy_n(data.begin() + static_cast<long>((29 - b) * n), n, rev.begin() + static_cast<long>(b * n));
  nn::Graph h(false);
  CHECK_THAT(h.value(nll_loss_arcnn(h, h.bind(p), s, OutcomeBatch{rev, n})).item(), WithinAbs(a, 1e-12));
}

TEST_CASE("loss gradients match finite differences", "[training][oracle]") {
  const int n = 6;
  Rng rng = make_stream(4, StreamTag::misc);
  const auto data = uniform_outcomes(8, n, rng);
  const auto norm = uniform_outcomes(8, n, rng);
  const auto s = ArchitectureSpec::cnn1d(n, 2, 4, 6, ConvBoundary::circular, OutputHead::product);
  auto p = init_params(s, 5);
  auto r = nn::gradient_check(p, [&](nn::Graph& g, const BoundParams& b) {
    return nll_loss_cnn(g, b, s, OutcomeBatch{data, n}, OutcomeBatch{norm, n});
  });
  CHECK(r.max_rel_error < 1e-5);
  const auto a = ArchitectureSpec::arcnn(n, 2, 3, 4);
  r = nn::gradient_check(init_params(a, 6),
                         [&](nn::Graph& g, const BoundParams& b) { return nll_loss_arcnn(g, b, a, OutcomeBatch{data, n}); });
  CHECK(r.max_rel_error < 1e-5);
}

TEST_CASE("overfitting a single repeated sample drives its probability to one", "[training]") {
  const int n = 4;
  OutcomeDataset ds;
  ds.n_qubits = n;
  for (int k = 0; k < 200; ++k) ds.samples.insert(ds.samples.end(), {2, 0, 3, 1});
  TrainConfig cfg;
  cfg.batch_size = 50;
  cfg.epochs = 400;
  cfg.lr = 2e-2;
  cfg.validation_fraction = 0.0;
  cfg.patience = 400;
  const auto s = ArchitectureSpec::arcnn(n, 2, 2, 4);
  const auto res = train(s, init_params(s, 1), ds, cfg);
  CHECK(res.report.epochs.back().train_nll < 0.02);
  const std::uint8_t target[] = {2, 0, 3, 1};
  CHECK(std::exp(evaluate_log_prob(res.params, s, OutcomeBatch{target, n})[0]) > 0.98);
}

TEST_CASE("arcnn recovers a product state's single-site distributions", "[training][statistical]") {
  const int n = 4;
  const auto povm = pauli4();
  const auto ds = sample_outcomes(PureState::product(n, Eigen::Vector2cd(1, 0)), povm, 10000, 7);
  TrainConfig cfg;
  cfg.epochs = 60;
  cfg.lr = 5e-3;
  cfg.seed = 8;
  const auto s = ArchitectureSpec::arcnn(n, 2, 2, 4);
  const auto res = train(s, init_params(s, 9), ds, cfg);
  const auto P = model_distribution(res.params, s);
  const double expected[4] = {1.0 / 6, 1.0 / 6, 1.0 / 3, 1.0 / 3};
  for (int i = 0; i < n; ++i) {
    const auto m = site_marginal(P, n, i);
    double tv = 0.0;
    for (int a = 0; a < 4; ++a) tv += 0.5 * std::abs(m[a] - expected[a]);
    INFO("site " << i);
    CHECK(tv < 0.02);
  }
  double z = 0.0;
  for (double v : P) z += v;
  CHECK_THAT(z, WithinAbs(1.0, 1e-8));
}

TEST_CASE("training contracts", "[training]") {
  const int n = 4;
  const auto povm = pauli4();
  const auto psi = tfim_ground_state(n);
  const auto truth = exact_distribution(psi, povm);
  const auto ds = sample_outcomes(psi, povm, 3000, 10);
  TrainConfig cfg;
  cfg.epochs = 40;
  cfg.lr = 1e-2;
  cfg.seed = 11;
  for (auto s : {ArchitectureSpec::arcnn(n, 2, 3, 4),
                 ArchitectureSpec::cnn1d(n, 2, 3, 4, ConvBoundary::circular, OutputHead::product)}) {
    INFO(s.describe());
    const auto a = train(s, init_params(s, 12), ds, cfg);
    const auto b = train(s, init_params(s, 12), ds, cfg);
    REQUIRE(a.report.epochs.size() == b.report.epochs.size());
    for (std::size_t e = 0; e < a.report.epochs.size(); ++e) {
      CHECK(a.report.epochs[e].train_nll == b.report.epochs[e].train_nll);
      CHECK(a.report.epochs[e].validation_nll == b.report.epochs[e].validation_nll);
    }
    CHECK(a.report.best_validation_nll <= a.report.epochs[0].validation_nll);
    const auto Q = model_distribution(a.params, s);
    // Gibbs: the model cross-entropy is bounded by the entropy of the truth.
    CHECK(cross_entropy(truth, Q) >= entropy(truth));
    const double se = std::sqrt(std::log(4.0) * n * std::log(4.0) * n / static_cast<double>(a.report.n_validation));
    CHECK(a.report.best_validation_nll >= entropy(truth) - 4.0 * se);
  }
}

TEST_CASE("exact and estimated normalization give compatible models", "[training][oracle]") {
  const int n = 4;
  const auto povm = pauli4();
  const auto psi = tfim_ground_state(n);
  const auto ds = sample_outcomes(psi, povm, 4000, 13);
  const auto s = ArchitectureSpec::cnn1d(n, 2, 3, 4, ConvBoundary::circular, OutputHead::product);
  TrainConfig cfg;
  cfg.epochs = 150;
  cfg.lr = 5e-3;
  cfg.seed = 14;
  const auto mc = train(s, init_params(s, 15), ds, cfg);
  cfg.exact_normalization = true;
  const auto ex = train(s, init_params(s, 15), ds, cfg);
  const auto rep = z_string_representation({0, 1}, povm);
  auto model_value = [&](const nn::ModelParams& p) {
    const auto Q = model_distribution(p, s);
    std::vector<std::uint8_t> a(n);
    double v = 0.0;
    for (std::size_t idx = 0; idx < Q.size(); ++idx) {
      outcome_from_index(idx, a);
      v += Q[idx] * rep(a);
    }
    return v;
  };
  std::vector<double> vals;
  for (std::size_t i = 0; i < ds.size(); ++i) vals.push_back(rep(ds.sample(i)));
  double m = 0.0, ss = 0.0;
  for (double v : vals) m += v / vals.size();
  for (double v : vals) ss += (v - m) * (v - m);
  const double stat = std::sqrt(ss / (vals.size() - 1) / vals.size());
  INFO("mc " << model_value(mc.params) << " exact " << model_value(ex.params) << " stat " << stat);
  CHECK(std::abs(model_value(mc.params) - model_value(ex.params)) < stat);
}

TEST_CASE("model KL to the truth shrinks with dataset size", "[training][statistical][slow]") {
  const int n = 3;
  const auto povm = pauli4();
  const auto psi = tfim_ground_state(4);
  // Three-site marginal of the four-site ground state as a mixed target.
  const int keep[] = {0, 1, 2};
  const DensityMatrix rho = DensityMatrix::cleaned(reduced_density_matrix(psi.amplitudes * psi.amplitudes.adjoint(), keep));
  const auto truth = exact_distribution(rho, povm);
  const auto s = ArchitectureSpec::arcnn(n, 2, 3, 6);
  std::vector<double> mean_kl;
  for (std::size_t ns : {300, 3000, 30000}) {
    double acc = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto ds = sample_outcomes(rho, povm, ns, 100 + seed);
      TrainConfig cfg;
      cfg.epochs = 200;
      cfg.patience = 20;
      cfg.lr = 1e-2;
      cfg.batch_size = std::min<std::size_t>(100, ns / 2);
      cfg.seed = seed;
      acc += kl(truth, model_distribution(train(s, init_params(s, seed), ds, cfg).params, s)) / 5.0;
    }
    mean_kl.push_back(acc);
  }
  INFO(mean_kl[0] << " " << mean_kl[1] << " " << mean_kl[2]);
  CHECK(mean_kl[0] > mean_kl[1]);
  CHECK(mean_kl[1] > mean_kl[2]);
}
