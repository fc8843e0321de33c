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

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "nqst/error.hpp"
#include "nqst/nn/graph.hpp"
#include "nqst/nn/ops.hpp"
#include "nqst/random.hpp"

namespace nqst {

enum class ModelKind { cnn, arcnn };
enum class ConvBoundary { circular, open };
enum class OutputHead { product, dense };

inline constexpr int kOutcomes = 4;

/// Network topology. Layers hold `features` channels each; arcnn heads emit 4 logits per site.
struct ArchitectureSpec {
  ModelKind kind = ModelKind::cnn;
  bool two_d = false;
  int rows = 1;
  int cols = 1;
  int layers = 1;
  int kernel = 1;
  int features = 1;
  ConvBoundary boundary = ConvBoundary::open;
  OutputHead head = OutputHead::product;

  static ArchitectureSpec arcnn(int n, int layers, int kernel, int features) {
    ArchitectureSpec s;
    s.kind = ModelKind::arcnn;
    s.cols = n;
    s.layers = layers;
    s.kernel = kernel;
    s.features = features;
    s.validate();
    return s;
  }

  static ArchitectureSpec cnn1d(int n, int layers, int kernel, int features, ConvBoundary b, OutputHead h) {
    ArchitectureSpec s;
    s.cols = n;
    s.layers = layers;
    s.kernel = kernel;
    s.features = features;
    s.boundary = b;
    s.head = h;
    s.validate();
    return s;
  }

  static ArchitectureSpec cnn2d(int rows, int cols, int layers, int kernel, int features, ConvBoundary b,
                                OutputHead h) {
    ArchitectureSpec s = cnn1d(cols, layers, kernel, features, b, h);
    s.two_d = true;
    s.rows = rows;
    s.validate();
    return s;
  }

  int n_sites() const { return rows * cols; }

  nn::Shape spatial() const {
    if (two_d) return {static_cast<std::size_t>(rows), static_cast<std::size_t>(cols)};
    return {static_cast<std::size_t>(cols)};
  }

  void validate() const {
    require(layers >= 1 && kernel >= 1 && features >= 1, "layers, kernel and features must be positive");
    require(rows >= 1 && cols >= 1, "lattice dimensions must be positive");
    require(two_d || rows == 1, "1D architectures have a single row");
    if (kind == ModelKind::arcnn) {
      require(!two_d, "the autoregressive network is one-dimensional only");
      require(boundary == ConvBoundary::open, "the autoregressive network needs open boundaries");
    }
    if (boundary == ConvBoundary::circular)
      require(kernel <= cols && (!two_d || kernel <= rows), "circular convolution needs kernel <= side length");
  }

  std::string describe() const {
    std::string s = kind == ModelKind::arcnn ? "arcnn" : "cnn";
    s += two_d ? " " + std::to_string(rows) + "x" + std::to_string(cols) : " N=" + std::to_string(cols);
    s += " L=" + std::to_string(layers) + " K=" + std::to_string(kernel) + " F=" + std::to_string(features);
    if (kind == ModelKind::cnn) {
      s += boundary == ConvBoundary::circular ? " circular" : " open";
      s += head == OutputHead::product ? " product" : " dense";
    }
    return s;
  }

  friend bool operator==(const ArchitectureSpec&, const ArchitectureSpec&) = default;
};

/// Furthest (1D) site separation the network can correlate: (K-1)L for the CNN, (K-1)L + 1 for
/// the autoregressive network whose first layer is shifted by one site. A dense head couples
/// every site, so it reports the lattice extent.
inline int d_max(const ArchitectureSpec& s) {
  if (s.kind == ModelKind::arcnn) return (s.kernel - 1) * s.layers + 1;
  if (s.head == OutputHead::dense) return (s.rows - 1) + (s.cols - 1);
  return (s.kernel - 1) * s.layers;
}

inline nn::Padding layer_padding(const ArchitectureSpec& s, int layer) {
  if (s.kind == ModelKind::arcnn) return layer == 0 ? nn::Padding::causal_shifted : nn::Padding::causal;
  return s.boundary == ConvBoundary::circular ? nn::Padding::circular : nn::Padding::open_same;
}

inline std::string kernel_name(int layer) { return "conv" + std::to_string(layer) + ".kernel"; }
inline std::string bias_name(int layer) { return "conv" + std::to_string(layer) + ".bias"; }

struct ParamSlot {
  std::string name;
  nn::Shape shape;
  std::size_t fan_in = 0;
};

inline std::vector<ParamSlot> parameter_layout(const ArchitectureSpec& s) {
  s.validate();
  std::vector<ParamSlot> out;
  const auto F = static_cast<std::size_t>(s.features), K = static_cast<std::size_t>(s.kernel);
  std::size_t cin = kOutcomes;
  for (int l = 0; l < s.layers; ++l) {
    nn::Shape ks = s.two_d ? nn::Shape{F, cin, K, K} : nn::Shape{F, cin, K};
    const std::size_t fan = cin * (s.two_d ? K * K : K);
    out.push_back({kernel_name(l), ks, fan});
    out.push_back({bias_name(l), {F}, fan});
    cin = F;
  }
  if (s.kind == ModelKind::arcnn) {
    out.push_back({"head.kernel", {kOutcomes, F, 1}, F});
    out.push_back({"head.bias", {kOutcomes}, F});
  } else if (s.head == OutputHead::product) {
    nn::Shape ks = s.two_d ? nn::Shape{1, F, 1, 1} : nn::Shape{1, F, 1};
    out.push_back({"head.kernel", ks, F});
    out.push_back({"head.bias", {1}, F});
  } else {
    const std::size_t d = F * static_cast<std::size_t>(s.n_sites());
    out.push_back({"head.kernel", {1, d}, d});
    out.push_back({"head.bias", {1}, d});
  }
  return out;
}

inline std::size_t parameter_count(const ArchitectureSpec& s) {
  std::size_t n = 0;
  for (const auto& slot : parameter_layout(s)) n += nn::shape_size(slot.shape);
  return n;
}

inline std::size_t parameter_count(const nn::ModelParams& p) {
  std::size_t n = 0;
  for (const auto& [name, t] : p) n += t.size();
  return n;
}

inline nn::ModelParams zero_params(const ArchitectureSpec& s) {
  nn::ModelParams p;
  for (const auto& slot : parameter_layout(s)) p.emplace(slot.name, nn::Tensor(slot.shape));
  return p;
}

/// Zero biases; kernel entries uniform in [-sqrt(1/fan_in), sqrt(1/fan_in)].
inline nn::ModelParams init_params(const ArchitectureSpec& s, std::uint64_t seed) {
  nn::ModelParams p;
  Rng rng = make_stream(seed, StreamTag::init);
  for (const auto& slot : parameter_layout(s)) {
    nn::Tensor t(slot.shape);
    if (slot.name.ends_with(".kernel")) {
      const double a = std::sqrt(1.0 / static_cast<double>(slot.fan_in));
      std::uniform_real_distribution<double> u(-a, a);
      for (auto& v : t.values()) v = u(rng);
    }
    p.emplace(slot.name, std::move(t));
  }
  return p;
}

/// Checks that `p` matches the layout of `s` and holds only finite values.
inline void check_params(const ArchitectureSpec& s, const nn::ModelParams& p) {
  const auto layout = parameter_layout(s);
  require(layout.size() == p.size(), "parameter set does not match the architecture");
  for (const auto& slot : layout) {
    const auto it = p.find(slot.name);
    require(it != p.end(), "missing parameter '" + slot.name + "'");
    require(it->second.shape() == slot.shape, "parameter '" + slot.name + "' has shape " +
                                                  nn::shape_string(it->second.shape()) + ", expected " +
                                                  nn::shape_string(slot.shape));
    if (!it->second.all_finite()) throw NumericalError("parameter '" + slot.name + "' is not finite");
  }
}

}  // namespace nqst
