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
#include <filesystem>
#include <random>

#include "nqst/models/architecture.hpp"
#include "nqst/models/checkpoint.hpp"
#include "nqst/models/networks.hpp"
#include "nqst/nn/gradcheck.hpp"

using namespace nqst;
using Catch::Matchers::WithinAbs;

namespace {

std::vector<std::uint8_t> random_outcomes(std::size_t count, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> u(0, 3);
  std::vector<std::uint8_t> out(count * static_cast<std::size_t>(n));
  for (auto& v : out) v = static_cast<std::uint8_t>(u(rng));
  return out;
}

// Random parameters with nonzero biases so no conditional is accidentally symmetric.
nn::ModelParams random_params(const ArchitectureSpec& s, std::uint64_t seed, double scale = 0.6) {
  auto p = init_params(s, seed);
  std::mt19937_64 rng(seed + 1);
  std::normal_distribution<double> g(0.0, scale);
  for (auto& [name, t] : p)
    for (auto& v : t.values()) v += g(rng);
  return p;
}

}  // namespace

TEST_CASE("parameter counts of the published architectures", "[models]") {
  CHECK(parameter_count(ArchitectureSpec::arcnn(16, 3, 6, 16)) == 3572);
  CHECK(parameter_count(ArchitectureSpec::cnn2d(4, 4, 2, 2, 16, ConvBoundary::circular, OutputHead::product)) == 1329);
  CHECK(parameter_count(ArchitectureSpec::cnn2d(4, 4, 2, 3, 16, ConvBoundary::open, OutputHead::dense)) == 3169);
  // Small 1D TFIM row: L = round(sqrt N), K = ceil(sqrt N) + 1, F = N.
  auto small = [](int n) {
    const int L = static_cast<int>(std::lround(std::sqrt(n)));
    const int K = static_cast<int>(std::ceil(std::sqrt(n))) + 1;
    return parameter_count(ArchitectureSpec::cnn1d(n, L, K, n, ConvBoundary::circular, OutputHead::product));
  };
  CHECK(small(3) == 73);
  CHECK(small(4) == 109);
  CHECK(small(6) == 259);
  CHECK(small(8) == 673);
}

TEST_CASE("d_max", "[models]") {
  CHECK(d_max(ArchitectureSpec::cnn1d(8, 2, 3, 4, ConvBoundary::open, OutputHead::product)) == 4);
  CHECK(d_max(ArchitectureSpec::arcnn(16, 3, 6, 16)) == 16);
  for (int L : {1, 2, 5}) CHECK(d_max(ArchitectureSpec::cnn1d(8, L, 1, 4, ConvBoundary::open, OutputHead::product)) == 0);
}

TEST_CASE("architecture validation", "[models][errors]") {
  CHECK_THROWS_AS(ArchitectureSpec::cnn1d(3, 1, 4, 2, ConvBoundary::circular, OutputHead::product), ConfigError);
  CHECK_THROWS_AS(ArchitectureSpec::arcnn(4, 0, 2, 2), ConfigError);
  auto s = ArchitectureSpec::arcnn(4, 1, 2, 2);
  s.two_d = true;
  s.rows = 2;
  CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("zero parameters give the uniform model", "[models]") {
  const auto all = enumerate_outcomes(3);
  const OutcomeBatch batch{all, 3};
  for (auto head : {OutputHead::product, OutputHead::dense}) {
    const auto s = ArchitectureSpec::cnn1d(3, 2, 2, 3, ConvBoundary::open, head);
    for (double v : evaluate_log_prob(zero_params(s), s, batch)) CHECK(v == 0.0);
  }
  const auto a = ArchitectureSpec::arcnn(3, 2, 2, 3);
  for (double v : evaluate_log_prob(zero_params(a), a, batch)) CHECK_THAT(v, WithinAbs(-3.0 * std::log(4.0), 1e-14));
}

TEST_CASE("circular product CNN is translation invariant", "[models][property]") {
  const int n = 8;
  const auto s = ArchitectureSpec::cnn1d(n, 2, 3, 4, ConvBoundary::circular, OutputHead::product);
  const auto p = random_params(s, 5);
  const auto all = enumerate_outcomes(n);
  std::vector<std::uint8_t> shifted(all.size());
  for (std::size_t b = 0; b < all.size() / n; ++b)
    for (int i = 0; i < n; ++i) shifted[b * n + (i + 1) % n] = all[b * n + i];
  const auto lp = evaluate_log_prob(p, s, OutcomeBatch{all, n});
  const auto ls = evaluate_log_prob(p, s, OutcomeBatch{shifted, n});
  double worst = 0.0;
  for (std::size_t i = 0; i < lp.size(); ++i) worst = std::max(worst, std::abs(lp[i] - ls[i]));
  CHECK(worst < 1e-10);

  const auto s2 = ArchitectureSpec::cnn2d(3, 4, 2, 2, 4, ConvBoundary::circular, OutputHead::product);
  const auto p2 = random_params(s2, 6);
  const auto x = random_outcomes(50, 12, 7);
  std::vector<std::uint8_t> y(x.size());
  for (std::size_t b = 0; b < 50; ++b)
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 4; ++c) y[b * 12 + ((r + 1) % 3) * 4 + (c + 3) % 4] = x[b * 12 + r * 4 + c];
  const auto lx = evaluate_log_prob(p2, s2, OutcomeBatch{x, 12});
  const auto ly = evaluate_log_prob(p2, s2, OutcomeBatch{y, 12});
  for (std::size_t i = 0; i < lx.size(); ++i) CHECK_THAT(lx[i], WithinAbs(ly[i], 1e-10));
}

TEST_CASE("autoregressive causality and correlation cutoff", "[models][property]") {
  for (auto s : {ArchitectureSpec::arcnn(12, 2, 3, 4), ArchitectureSpec::arcnn(16, 3, 6, 16),
                 ArchitectureSpec::arcnn(10, 1, 2, 3)}) {
    const int n = s.n_sites();
    const int dm = d_max(s);
    const auto p = random_params(s, 11);
    const auto base = random_outcomes(3, n, 12);
    bool reached_dmax = false;
    for (std::size_t b = 0; b < 3; ++b) {
      std::vector<std::uint8_t> one(base.begin() + b * n, base.begin() + (b + 1) * n);
      const nn::Tensor c0 = arcnn_conditionals(p, s, OutcomeBatch{one, static_cast<std::size_t>(n)});
      for (int j = 0; j < n; ++j) {
        auto pert = one;
        pert[j] = static_cast<std::uint8_t>((pert[j] + 1 + b) % 4);
        const nn::Tensor c1 = arcnn_conditionals(p, s, OutcomeBatch{pert, static_cast<std::size_t>(n)});
        for (int i = 0; i < n; ++i) {
          bool changed = false;
          for (int c = 0; c < 4; ++c) changed = changed || c0[c * n + i] != c1[c * n + i];
          INFO(s.describe() << " i=" << i << " j=" << j);
          if (i <= j || i - j > dm) CHECK_FALSE(changed);
          if (changed && i - j == dm) reached_dmax = true;
        }
      }
    }
    if (dm < n) CHECK(reached_dmax);
  }
}

TEST_CASE("autoregressive model is exactly normalized", "[models][oracle]") {
  for (int n : {1, 3, 6}) {
    const auto s = ArchitectureSpec::arcnn(n, 2, 3, 5);
    const auto p = random_params(s, 20 + n, 1.0);
    const auto all = enumerate_outcomes(n);
    const auto lp = evaluate_log_prob(p, s, OutcomeBatch{all, static_cast<std::size_t>(n)});
    double z = 0.0;
    for (double v : lp) z += std::exp(v);
    CHECK_THAT(z, WithinAbs(1.0, 1e-8));

    const nn::Tensor c = arcnn_conditionals(p, s, OutcomeBatch{all, static_cast<std::size_t>(n)});
    for (std::size_t b = 0; b < std::min<std::size_t>(5, lp.size()); ++b) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) {
        double tot = 0.0;
        for (int k = 0; k < 4; ++k) tot += c[(b * 4 + k) * n + i];
        CHECK_THAT(tot, WithinAbs(1.0, 1e-12));
        acc += std::log(c[(b * 4 + all[b * n + i]) * n + i]);
      }
      CHECK_THAT(lp[b], WithinAbs(acc, 1e-12));
    }
  }
}

TEST_CASE("full-architecture gradients match finite differences", "[models][autodiff][oracle]") {
  const std::vector<ArchitectureSpec> specs = {
      ArchitectureSpec::arcnn(16, 3, 6, 16),
      ArchitectureSpec::cnn2d(4, 4, 2, 2, 16, ConvBoundary::circular, OutputHead::product),
      ArchitectureSpec::cnn2d(4, 4, 2, 3, 16, ConvBoundary::open, OutputHead::dense),
      ArchitectureSpec::cnn1d(6, 2, 4, 6, ConvBoundary::circular, OutputHead::product),
  };
  for (const auto& s : specs) {
    const auto data = random_outcomes(4, s.n_sites(), 31);
    const OutcomeBatch batch{data, static_cast<std::size_t>(s.n_sites())};
    const auto r = nn::gradient_check(random_params(s, 30, 0.3), [&](nn::Graph& g, const BoundParams& p) {
      return nn::mean(g, model_log_prob(g, p, s, batch));
    });
    INFO(s.describe() << " max rel " << r.max_rel_error << " norm rel " << r.norm_rel_error);
    CHECK(r.n_checked == parameter_count(s));
    CHECK(r.max_rel_error < 1e-5);
  }
}

TEST_CASE("checkpoint round trip", "[models][io]") {
  const auto path = (std::filesystem::temp_directory_path() / "nqst_ckpt.bin").string();
  for (const auto& s : {ArchitectureSpec::arcnn(5, 2, 3, 4),
                        ArchitectureSpec::cnn2d(2, 3, 1, 2, 3, ConvBoundary::open, OutputHead::dense)}) {
    const auto p = random_params(s, 40);
    save_checkpoint(path, s, p);
    const auto c = load_checkpoint(path);
    CHECK(c.spec == s);
    for (const auto& [name, t] : p) CHECK(c.params.at(name).values().size() == t.size());
    for (const auto& [name, t] : p)
      for (std::size_t i = 0; i < t.size(); ++i) CHECK(c.params.at(name)[i] == t[i]);
  }
  auto bad = init_params(ArchitectureSpec::arcnn(5, 2, 3, 4), 1);
  bad.at("head.bias")[0] = std::nan("");
  CHECK_THROWS_AS(save_checkpoint(path, ArchitectureSpec::arcnn(5, 2, 3, 4), bad), NumericalError);
}
