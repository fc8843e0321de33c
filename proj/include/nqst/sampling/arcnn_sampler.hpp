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
#include <cstdint>
#include <vector>

#include "nqst/models/architecture.hpp"
#include "nqst/povm/born_sampler.hpp"
#include "nqst/povm/dataset.hpp"
#include "nqst/random.hpp"

namespace nqst {

/// Ancestral sampler for the autoregressive network. Site i's column of every layer depends only
/// on columns < i, so one pass over the sites evaluates each conditional exactly once.
class ArcnnSampler {
 public:
  ArcnnSampler(const ArchitectureSpec& spec, const nn::ModelParams& params) : spec_(spec), params_(params) {
    require(spec.kind == ModelKind::arcnn, "ArcnnSampler needs an arcnn architecture");
    check_params(spec_, params_);
  }

  /// Draws `count` strings into `out` (sample-major); optionally records log P of each.
  void sample_into(std::size_t count, Rng& rng, std::uint8_t* out, double* log_probs = nullptr) const {
    const int n = spec_.n_sites(), L = spec_.layers, K = spec_.kernel, F = spec_.features;
    std::vector<double> h(static_cast<std::size_t>(L) * n * F);  // [layer][site][feature]
    auto H = [&](int l, int i) { return h.data() + (static_cast<std::size_t>(l) * n + i) * F; };
    const nn::Tensor& hk = params_.at("head.kernel");
    const nn::Tensor& hb = params_.at("head.bias");
    std::uniform_real_distribution<double> u(0.0, 1.0);

    for (std::size_t b = 0; b < count; ++b) {
      std::uint8_t* a = out + b * static_cast<std::size_t>(n);
      double lp = 0.0;
      for (int i = 0; i < n; ++i) {
        for (int l = 0; l < L; ++l) {
          const nn::Tensor& k = params_.at(kernel_name(l));
          const nn::Tensor& bias = params_.at(bias_name(l));
          const int left = nn::padding_left(layer_padding(spec_, l), K);
          double* dst = H(l, i);
          for (int f = 0; f < F; ++f) dst[f] = bias[static_cast<std::size_t>(f)];
          for (int t = 0; t < K; ++t) {
            const int s = i - left + t;
            if (s < 0 || s >= n) continue;
            if (l == 0) {
              const int c = a[s];
              for (int f = 0; f < F; ++f) dst[f] += k[(static_cast<std::size_t>(f) * kOutcomes + c) * K + t];
            } else {
              const double* src = H(l - 1, s);
              for (int f = 0; f < F; ++f) {
                double acc = 0.0;
                for (int c = 0; c < F; ++c) acc += k[(static_cast<std::size_t>(f) * F + c) * K + t] * src[c];
                dst[f] += acc;
              }
            }
          }
          for (int f = 0; f < F; ++f) dst[f] = std::tanh(dst[f]);
        }
        const double* top = H(L - 1, i);
        double logits[kOutcomes];
        double m = -1e300;
        for (int c = 0; c < kOutcomes; ++c) {
          double acc = hb[static_cast<std::size_t>(c)];
          for (int f = 0; f < F; ++f) acc += hk[static_cast<std::size_t>(c) * F + f] * top[f];
          logits[c] = acc;
          m = std::max(m, acc);
        }
        double z = 0.0, p[kOutcomes];
        for (int c = 0; c < kOutcomes; ++c) z += (p[c] = std::exp(logits[c] - m));
        double r = u(rng) * z;
        int pick = kOutcomes - 1;
        for (int c = 0; c < kOutcomes; ++c) {
          if (r < p[c]) {
            pick = c;
            break;
          }
          r -= p[c];
        }
        a[i] = static_cast<std::uint8_t>(pick);
        lp += logits[pick] - m - std::log(z);
      }
      if (log_probs) log_probs[b] = lp;
    }
  }

 private:
  ArchitectureSpec spec_;
  nn::ModelParams params_;
};

/// Exact i.i.d. samples from the autoregressive model. Sample k uses the stream of chunk
/// k / kSamplesPerStream, so the output depends only on (params, n_samples, seed).
inline OutcomeDataset sample_arcnn(const nn::ModelParams& params, const ArchitectureSpec& spec,
                                   std::size_t n_samples, std::uint64_t seed,
                                   std::vector<double>* log_probs = nullptr, std::uint32_t povm_code = 0) {
  const ArcnnSampler sampler(spec, params);
  OutcomeDataset ds;
  ds.n_qubits = spec.n_sites();
  ds.povm_code = povm_code;
  ds.seed = seed;
  ds.samples.resize(n_samples * static_cast<std::size_t>(ds.n_qubits));
  if (log_probs) log_probs->assign(n_samples, 0.0);
  for (std::size_t start = 0, chunk = 0; start < n_samples; start += kSamplesPerStream, ++chunk) {
    const std::size_t count = std::min(kSamplesPerStream, n_samples - start);
    Rng rng = make_stream(seed, StreamTag::model_sampling, chunk);
    sampler.sample_into(count, rng, ds.samples.data() + start * static_cast<std::size_t>(ds.n_qubits),
                        log_probs ? log_probs->data() + start : nullptr);
  }
  return ds;
}

}  // namespace nqst
