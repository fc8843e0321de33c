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
#include <string>

#include "nqst/error.hpp"
#include "nqst/nn/graph.hpp"

namespace nqst::nn {

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  ModelParams m;
  ModelParams v;

  static AdamState for_params(const ModelParams& params, double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                              double eps = 1e-8) {
    AdamState s{lr, beta1, beta2, eps, 0, {}, {}};
    for (const auto& [name, t] : params) {
      s.m.emplace(name, Tensor(t.shape()));
      s.v.emplace(name, Tensor(t.shape()));
    }
    return s;
  }
};

/// Bias-corrected Adam update applied in place.
inline void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state) {
  for (const auto& [name, g] : grads)
    if (!g.all_finite()) throw NumericalError("non-finite gradient for parameter '" + name + "'");
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (auto& [name, p] : params) {
    const auto git = grads.find(name);
    if (git == grads.end()) throw ConfigError("missing gradient for parameter '" + name + "'");
    const Tensor& g = git->second;
    Tensor& m = state.m.at(name);
    Tensor& v = state.v.at(name);
    p.check_same(g, "adam_step");
    p.check_same(m, "adam_step state");
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      p[i] -= state.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + state.eps);
    }
  }
}

}  // namespace nqst::nn
