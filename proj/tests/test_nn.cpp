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

#include "nqst/nn/adam.hpp"
#include "nqst/nn/gradcheck.hpp"
#include "nqst/nn/graph.hpp"
#include "nqst/nn/ops.hpp"

using namespace nqst;
using namespace nqst::nn;
using Catch::Matchers::WithinAbs;

namespace {

Tensor random_tensor(Shape s, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, scale);
  Tensor t(std::move(s));
  for (auto& v : t.values()) v = g(rng);
  return t;
}

Tensor run_conv1d(const Tensor& x, const Tensor& k, const Tensor& b, Padding p) {
  Graph g(false);
  return g.value(conv1d(g, g.constant(x), g.constant(k), g.constant(b), p));
}

Tensor run_conv2d(const Tensor& x, const Tensor& k, const Tensor& b, Padding p) {
  Graph g(false);
  return g.value(conv2d(g, g.constant(x), g.constant(k), g.constant(b), p));
}

// Direct nested-loop 2D convolution with explicit index arithmetic.
Tensor naive_conv2d(const Tensor& x, const Tensor& k, const Tensor& b, bool circular) {
  const long B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3), O = k.dim(0), K = k.dim(2);
  const long left = (K - 1) / 2;
  Tensor y({x.dim(0), k.dim(0), x.dim(2), x.dim(3)});
  for (long bb = 0; bb < B; ++bb)
    for (long o = 0; o < O; ++o)
      for (long r = 0; r < H; ++r)
        for (long c = 0; c < W; ++c) {
          double acc = b[o];
          for (long ci = 0; ci < C; ++ci)
            for (long ty = 0; ty < K; ++ty)
              for (long tx = 0; tx < K; ++tx) {
                long rr = r - left + ty, cc = c - left + tx;
                if (circular) {
                  rr = (rr % H + H) % H;
                  cc = (cc % W + W) % W;
                } else if (rr < 0 || rr >= H || cc < 0 || cc >= W) {
                  continue;
                }
                acc += k[((o * C + ci) * K + ty) * K + tx] * x[((bb * C + ci) * H + rr) * W + cc];
              }
          y[((bb * O + o) * H + r) * W + c] = acc;
        }
  return y;
}

double max_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("tensor basics", "[nn]") {
  Tensor t({2, 3}, 1.5);
  CHECK(t.size() == 6);
  CHECK(t.reshaped({3, 2}).shape() == Shape{3, 2});
  CHECK_THROWS_AS(t.reshaped({4}), ConfigError);
  CHECK_THROWS_AS(Tensor({2}, std::vector<double>{1, 2, 3}), ConfigError);
  CHECK(Tensor::scalar(2.0).item() == 2.0);
}

TEST_CASE("conv1d", "[nn][conv]") {
  SECTION("1x1 identity kernel adds the bias") {
    const Tensor x = random_tensor({2, 3, 5}, 1);
    Tensor k({3, 3, 1});
    for (int c = 0; c < 3; ++c) k[c * 3 + c] = 1.0;
    const Tensor b({3}, std::vector<double>{0.5, -1.0, 2.0});
    for (Padding p : {Padding::circular, Padding::open_same}) {
      const Tensor y = run_conv1d(x, k, b, p);
      for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == x[i] + b[(i / 5) % 3]);
    }
  }
  SECTION("circular padding maps constants to constants") {
    const Tensor x({1, 2, 7}, 0.3);
    const Tensor y = run_conv1d(x, random_tensor({4, 2, 3}, 2), random_tensor({4}, 3), Padding::circular);
    for (std::size_t o = 0; o < 4; ++o)
      for (std::size_t i = 1; i < 7; ++i) CHECK_THAT(y[o * 7 + i], WithinAbs(y[o * 7], 1e-14));
  }
  SECTION("causal receptive fields by perturbation scan") {
    const std::size_t W = 9;
    for (int K : {1, 2, 3, 4}) {
      const Tensor k = random_tensor({1, 1, static_cast<std::size_t>(K)}, 10 + K);
      const Tensor b({1});
      const Tensor x = random_tensor({1, 1, W}, 20 + K);
      for (Padding p : {Padding::causal, Padding::causal_shifted}) {
        const Tensor y0 = run_conv1d(x, k, b, p);
        for (long j = 0; j < static_cast<long>(W); ++j) {
          Tensor xp = x;
          xp[j] += 1.0;
          const Tensor y1 = run_conv1d(xp, k, b, p);
          for (long i = 0; i < static_cast<long>(W); ++i) {
            const bool changed = y1[i] != y0[i];
            const bool expect = p == Padding::causal ? (j <= i && i - j <= K - 1) : (j < i && i - j <= K);
            INFO("K=" << K << " " << padding_name(p) << " i=" << i << " j=" << j);
            CHECK(changed == expect);
          }
        }
      }
    }
  }
  SECTION("shape errors") {
    CHECK_THROWS_AS(run_conv1d(Tensor({1, 2, 5}), Tensor({3, 1, 3}), Tensor({3}), Padding::open_same), ConfigError);
    CHECK_THROWS_AS(run_conv1d(Tensor({1, 1, 2}), Tensor({1, 1, 3}), Tensor({1}), Padding::circular), ConfigError);
  }
}

TEST_CASE("conv2d", "[nn][conv]") {
  SECTION("1x1 identity kernel adds the bias") {
    const Tensor x = random_tensor({2, 2, 3, 4}, 4);
    Tensor k({2, 2, 1, 1});
    k[0] = k[3] = 1.0;
    const Tensor b({2}, std::vector<double>{0.25, -0.75});
    const Tensor y = run_conv2d(x, k, b, Padding::open_same);
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == x[i] + b[(i / 12) % 2]);
  }
  SECTION("circular padding commutes with a row shift") {
    const Tensor base = random_tensor({1, 2, 1, 4}, 5);
    Tensor x({1, 2, 3, 4});
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t j = 0; j < 4; ++j) x[(c * 3 + r) * 4 + j] = base[c * 4 + j];
    const Tensor y = run_conv2d(x, random_tensor({3, 2, 3, 3}, 6), random_tensor({3}, 7), Padding::circular);
    for (std::size_t o = 0; o < 3; ++o)
      for (std::size_t r = 1; r < 3; ++r)
        for (std::size_t j = 0; j < 4; ++j)
          CHECK_THAT(y[(o * 3 + r) * 4 + j], WithinAbs(y[(o * 3) * 4 + j], 1e-13));
  }
  SECTION("random 3x3 against the nested-loop reference") {
    const Tensor x = random_tensor({2, 3, 4, 5}, 8);
    const Tensor k = random_tensor({2, 3, 3, 3}, 9);
    const Tensor b = random_tensor({2}, 10);
    CHECK(max_diff(run_conv2d(x, k, b, Padding::open_same), naive_conv2d(x, k, b, false)) < 1e-12);
    CHECK(max_diff(run_conv2d(x, k, b, Padding::circular), naive_conv2d(x, k, b, true)) < 1e-12);
    const Tensor k2 = random_tensor({2, 3, 2, 2}, 11);
    CHECK(max_diff(run_conv2d(x, k2, b, Padding::circular), naive_conv2d(x, k2, b, true)) < 1e-12);
  }
  CHECK_THROWS_AS(run_conv2d(Tensor({1, 1, 3, 3}), Tensor({1, 1, 3, 3}), Tensor({1}), Padding::causal), ConfigError);
}

TEST_CASE("reverse-mode gradients", "[nn][autodiff]") {
  SECTION("d sum(tanh x) / dx = 1 - tanh^2") {
    Graph g;
    const Tensor xt = random_tensor({3, 4}, 12);
    Var x = g.parameter("x", xt);
    g.backward(nn::sum(g, nn::tanh(g, x)));
    const Tensor d = g.grad(x);
    for (std::size_t i = 0; i < xt.size(); ++i)
      CHECK_THAT(d[i], WithinAbs(1.0 - std::tanh(xt[i]) * std::tanh(xt[i]), 1e-15));
  }
  SECTION("unused parameter has zero gradient") {
    Graph g;
    Var x = g.parameter("x", random_tensor({3}, 13));
    Var unused = g.parameter("u", random_tensor({2}, 14));
    g.backward(nn::sum(g, nn::exp(g, x)));
    const Tensor d = g.grad(unused);
    for (double v : d.values()) CHECK(v == 0.0);
  }
  SECTION("errors") {
    Graph g;
    Var x = g.parameter("x", random_tensor({3}, 15));
    CHECK_THROWS_AS(g.backward(nn::tanh(g, x)), ConfigError);
    Var o = opaque(g, Tensor::scalar(1.0), {x}, "floor");
    CHECK_THROWS_AS(g.backward(nn::scale(g, o, 2.0)), ConfigError);
    Graph ng(false);
    Var y = ng.parameter("y", Tensor::scalar(1.0));
    CHECK_THROWS_AS(ng.backward(y), ConfigError);
  }
}

TEST_CASE("finite-difference checks for each op", "[nn][autodiff][oracle]") {
  const std::uint8_t labels[] = {0, 3, 1, 2, 2, 0, 1, 3, 0, 1, 2, 3};
  ModelParams p;
  p["x3"] = random_tensor({2, 3, 5}, 20);
  p["k1"] = random_tensor({4, 3, 3}, 21);
  p["b1"] = random_tensor({4}, 22);
  p["x4"] = random_tensor({2, 3, 3, 4}, 23);
  p["k2"] = random_tensor({2, 3, 2, 2}, 24);
  p["b2"] = random_tensor({2}, 25);
  p["w"] = random_tensor({3, 6}, 26);
  p["bw"] = random_tensor({3}, 27);
  p["pos"] = random_tensor({6}, 28);

  using Loss = std::function<Var(Graph&, const std::map<std::string, Var>&)>;
  std::vector<std::pair<std::string, Loss>> cases;
  for (Padding pad : {Padding::circular, Padding::open_same, Padding::causal, Padding::causal_shifted})
    cases.emplace_back(std::string("conv1d ") + padding_name(pad), [pad](Graph& g, const auto& v) {
      return nn::sum(g, nn::tanh(g, nn::conv1d(g, v.at("x3"), v.at("k1"), v.at("b1"), pad)));
    });
  for (Padding pad : {Padding::circular, Padding::open_same})
    cases.emplace_back(std::string("conv2d ") + padding_name(pad), [pad](Graph& g, const auto& v) {
      Var y = nn::conv2d(g, v.at("x4"), v.at("k2"), v.at("b2"), pad);
      return nn::sum(g, nn::mul(g, y, nn::tanh(g, y)));
    });
  cases.emplace_back("linear+logsumexp", [](Graph& g, const auto& v) {
    Var x = nn::reshape(g, nn::tanh(g, v.at("x3")), {5, 6});
    return nn::logsumexp(g, nn::linear(g, x, v.at("w"), v.at("bw")));
  });
  cases.emplace_back("log_softmax+gather", [&labels](Graph& g, const auto& v) {
    Var c = nn::conv1d(g, v.at("x3"), v.at("k1"), v.at("b1"), Padding::open_same);
    Var sel = nn::gather_channels(g, nn::log_softmax_channels(g, c), std::span<const std::uint8_t>(labels, 10));
    return nn::mean(g, nn::sum_per_sample(g, sel));
  });
  cases.emplace_back("exp/log/add/scale", [](Graph& g, const auto& v) {
    Var e = nn::exp(g, v.at("pos"));
    Var l = nn::log(g, nn::add_scalar(g, e, 1.0));
    return nn::sum(g, nn::add(g, nn::scale(g, l, -0.7), nn::mul(g, e, l)));
  });
  for (const auto& [name, loss] : cases) {
    INFO(name);
    const auto r = gradient_check(p, loss);
    CHECK(r.max_rel_error < 1e-5);
  }
}

TEST_CASE("softmax is positive and normalized", "[nn]") {
  Graph g(false);
  Var y = softmax_channels(g, g.constant(random_tensor({3, 4, 5}, 30, 5.0)));
  const Tensor& t = g.value(y);
  for (std::size_t b = 0; b < 3; ++b)
    for (std::size_t s = 0; s < 5; ++s) {
      double tot = 0.0;
      for (std::size_t c = 0; c < 4; ++c) {
        CHECK(t[(b * 4 + c) * 5 + s] > 0.0);
        tot += t[(b * 4 + c) * 5 + s];
      }
      CHECK_THAT(tot, WithinAbs(1.0, 1e-12));
    }
}

TEST_CASE("one-hot round trip", "[nn]") {
  const std::vector<std::uint8_t> a = {0, 1, 2, 3, 3, 2, 1, 0};
  const Tensor x = one_hot(a, 4, {4});
  CHECK(x.shape() == Shape{2, 4, 4});
  CHECK(decode_one_hot(x) == a);
}

TEST_CASE("Adam", "[nn][adam]") {
  ModelParams p{{"x", Tensor({3}, std::vector<double>{1.0, -2.0, 0.5})}};
  SECTION("zero gradient leaves parameters unchanged") {
    auto s = AdamState::for_params(p);
    const ModelParams g{{"x", Tensor({3})}};
    auto q = p;
    adam_step(q, g, s);
    CHECK(s.step == 1);
    for (std::size_t i = 0; i < 3; ++i) CHECK(q.at("x")[i] == p.at("x")[i]);
  }
  SECTION("first step of a constant gradient moves by lr") {
    auto s = AdamState::for_params(p, 0.01);
    const ModelParams g{{"x", Tensor({3}, std::vector<double>{0.3, -5.0, 1e3})}};
    auto q = p;
    adam_step(q, g, s);
    const double expect[3] = {-0.01, 0.01, -0.01};
    for (std::size_t i = 0; i < 3; ++i) CHECK_THAT(q.at("x")[i] - p.at("x")[i], WithinAbs(expect[i], 1e-9));
  }
  SECTION("quadratic bowl converges") {
    auto s = AdamState::for_params(p, 1e-2);
    auto q = p;
    for (int it = 0; it < 2000; ++it) {
      Graph g;
      const auto v = g.bind(q);
      g.backward(nn::sum(g, nn::mul(g, v.at("x"), v.at("x"))));
      adam_step(q, g.grads(v), s);
    }
    double n2 = 0.0;
    for (double x : q.at("x").values()) n2 += x * x;
    CHECK(std::sqrt(n2) < 1e-3);
  }
  SECTION("non-finite gradients abort") {
    auto s = AdamState::for_params(p);
    const ModelParams g{{"x", Tensor({3}, std::vector<double>{0.0, std::nan(""), 0.0})}};
    CHECK_THROWS_AS(adam_step(p, g, s), NumericalError);
  }
}
