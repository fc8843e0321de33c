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
#include <functional>

#include "nqst/nn/graph.hpp"

namespace nqst::nn {

struct GradCheckResult {
  double max_rel_error = 0.0;  // over entries, |ad - fd| / max(|ad|, |fd|, floor)
  double norm_rel_error = 0.0;  // ||ad - fd|| / ||fd||
  std::size_t n_checked = 0;
};

/// Compares backward() against central differences of `loss` for every parameter entry.
inline GradCheckResult gradient_check(const ModelParams& params,
                                      const std::function<Var(Graph&, const std::map<std::string, Var>&)>& loss,
                                      double h = 1e-5, double floor = 1e-6) {
  Graph g;
  const auto bound = g.bind(params);
  g.backward(loss(g, bound));
  const ModelParams ad = g.grads(bound);

  auto eval = [&](const ModelParams& p) {
    Graph ng(false);
    const auto b = ng.bind(p);
    return ng.value(loss(ng, b)).item();
  };

  GradCheckResult r;
  double diff2 = 0.0, ref2 = 0.0;
  ModelParams work = params;
  for (auto& [name, t] : work) {
    const Tensor& a = ad.at(name);
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double orig = t[i];
      t[i] = orig + h;
      const double fp = eval(work);
      t[i] = orig - h;
      const double fm = eval(work);
      t[i] = orig;
      const double fd = (fp - fm) / (2.0 * h);
      const double err = std::abs(a[i] - fd);
      r.max_rel_error = std::max(r.max_rel_error, err / std::max({std::abs(a[i]), std::abs(fd), floor}));
      diff2 += err * err;
      ref2 += fd * fd;
      ++r.n_checked;
    }
  }
  r.norm_rel_error = ref2 > 0.0 ? std::sqrt(diff2 / ref2) : std::sqrt(diff2);
  return r;
}

}  // namespace nqst::nn
