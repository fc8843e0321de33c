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

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "nqst/models/architecture.hpp"
#include "nqst/nn/graph.hpp"
#include "nqst/nn/ops.hpp"
#include "nqst/povm/dataset.hpp"

namespace nqst {

using BoundParams = std::map<std::string, nn::Var>;

namespace detail {

inline nn::Var conv(nn::Graph& g, const ArchitectureSpec& s, nn::Var x, nn::Var k, nn::Var b, nn::Padding pad) {
  return s.two_d ? nn::conv2d(g, x, k, b, pad) : nn::conv1d(g, x, k, b, pad);
}

inline nn::Var trunk(nn::Graph& g, const BoundParams& p, const ArchitectureSpec& s, OutcomeBatch batch) {
  require(batch.n_sites == static_cast<std::size_t>(s.n_sites()),
          "outcome strings have " + std::to_string(batch.n_sites) + " sites, model expects " +
              std::to_string(s.n_sites()));
  nn::Var x = g.constant(nn::one_hot(batch.data, batch.n_sites, s.spatial()));
  for (int l = 0; l < s.layers; ++l)
    x = nn::tanh(g, conv(g, s, x, p.at(kernel_name(l)), p.at(bias_name(l)), layer_padding(s, l)));
  return x;
}

}  // namespace detail

/// log P~(a) for each string in the batch, shape [B]. The model never exponentiates.
inline nn::Var cnn_log_prob_unnormalized(nn::Graph& g, const BoundParams& p, const ArchitectureSpec& s,
                                         OutcomeBatch batch) {
  require(s.kind == ModelKind::cnn, "cnn_log_prob_unnormalized needs a cnn architecture");
  nn::Var h = detail::trunk(g, p, s, batch);
  const std::size_t B = batch.size();
  if (s.head == OutputHead::product) {
    h = detail::conv(g, s, h, p.at("head.kernel"), p.at("head.bias"), nn::Padding::open_same);
    return nn::sum_per_sample(g, h);
  }
  const std::size_t d = static_cast<std::size_t>(s.features) * static_cast<std::size_t>(s.n_sites());
  h = nn::linear(g, nn::reshape(g, h, {B, d}), p.at("head.kernel"), p.at("head.bias"));
  return nn::reshape(g, h, {B});
}

/// Per-site log conditionals log P(a_i = c | a_<i), shape [B, 4, N].
inline nn::Var arcnn_log_conditionals(nn::Graph& g, const BoundParams& p, const ArchitectureSpec& s,
                                      OutcomeBatch batch) {
  require(s.kind == ModelKind::arcnn, "arcnn_log_conditionals needs an arcnn architecture");
  nn::Var h = detail::trunk(g, p, s, batch);
  h = nn::conv1d(g, h, p.at("head.kernel"), p.at("head.bias"), nn::Padding::open_same);
  return nn::log_softmax_channels(g, h);
}

/// Exactly normalized log P(a) for each string in the batch, shape [B].
inline nn::Var arcnn_log_prob(nn::Graph& g, const BoundParams& p, const ArchitectureSpec& s, OutcomeBatch batch) {
  nn::Var lc = arcnn_log_conditionals(g, p, s, batch);
  return nn::sum_per_sample(g, nn::gather_channels(g, lc, batch.data));
}

/// Model log-probability graph: normalized for arcnn, unnormalized for cnn.
inline nn::Var model_log_prob(nn::Graph& g, const BoundParams& p, const ArchitectureSpec& s, OutcomeBatch batch) {
  return s.kind == ModelKind::arcnn ? arcnn_log_prob(g, p, s, batch) : cnn_log_prob_unnormalized(g, p, s, batch);
}

/// Inference-only evaluation of model_log_prob in chunks.
inline std::vector<double> evaluate_log_prob(const nn::ModelParams& params, const ArchitectureSpec& s,
                                             OutcomeBatch batch, std::size_t chunk = 4096) {
  std::vector<double> out;
  out.reserve(batch.size());
  for (std::size_t start = 0; start < batch.size(); start += chunk) {
    const std::size_t n = std::min(chunk, batch.size() - start);
    OutcomeBatch sub{batch.data.subspan(start * batch.n_sites, n * batch.n_sites), batch.n_sites};
    nn::Graph g(false);
    const auto bound = g.bind(params);
    const auto& v = g.value(model_log_prob(g, bound, s, sub));
    out.insert(out.end(), v.values().begin(), v.values().end());
  }
  return out;
}

/// Conditionals P(a_i = c | a_<i) as a [B, 4, N] tensor.
inline nn::Tensor arcnn_conditionals(const nn::ModelParams& params, const ArchitectureSpec& s, OutcomeBatch batch) {
  nn::Graph g(false);
  const auto bound = g.bind(params);
  nn::Tensor t = g.value(arcnn_log_conditionals(g, bound, s, batch));
  for (auto& v : t.values()) v = std::exp(v);
  return t;
}

/// All 4^N outcome strings in index order (site 0 most significant).
inline std::vector<std::uint8_t> enumerate_outcomes(int n) {
  require(n >= 1 && n <= 10, "outcome enumeration is limited to 10 sites");
  const std::size_t total = std::size_t{1} << (2 * n);
  std::vector<std::uint8_t> out(total * static_cast<std::size_t>(n));
  for (std::size_t idx = 0; idx < total; ++idx)
    outcome_from_index(idx, std::span<std::uint8_t>(out).subspan(idx * n, static_cast<std::size_t>(n)));
  return out;
}

/// Normalized model distribution over all 4^N outcomes (exact Z for the cnn).
inline std::vector<double> model_distribution(const nn::ModelParams& params, const ArchitectureSpec& s) {
  const int n = s.n_sites();
  const auto all = enumerate_outcomes(n);
  auto lp = evaluate_log_prob(params, s, OutcomeBatch{all, static_cast<std::size_t>(n)});
  const double m = *std::max_element(lp.begin(), lp.end());
  double z = 0.0;
  for (double& v : lp) z += (v = std::exp(v - m));
  for (double& v : lp) v /= z;
  return lp;
}

/// Exact log Z of the cnn by enumeration.
inline double exact_log_normalization(const nn::ModelParams& params, const ArchitectureSpec& s) {
  const int n = s.n_sites();
  const auto all = enumerate_outcomes(n);
  const auto lp = evaluate_log_prob(params, s, OutcomeBatch{all, static_cast<std::size_t>(n)});
  const double m = *std::max_element(lp.begin(), lp.end());
  double z = 0.0;
  for (double v : lp) z += std::exp(v - m);
  return m + std::log(z);
}

}  // namespace nqst
