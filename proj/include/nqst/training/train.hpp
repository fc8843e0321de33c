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
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "nqst/error.hpp"
#include "nqst/models/architecture.hpp"
#include "nqst/models/networks.hpp"
#include "nqst/nn/adam.hpp"
#include "nqst/povm/dataset.hpp"
#include "nqst/random.hpp"

namespace nqst {

/// Sites up to which the cnn normalization is enumerated exactly for validation.
inline constexpr int kExactNormalizationCap = 6;

struct TrainConfig {
  std::size_t batch_size = 100;
  int epochs = 2000;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t n_norm_samples = 0;  // uniform normalization samples per batch; 0 means batch size
  std::uint64_t seed = 0;
  int patience = 50;
  double validation_fraction = 0.1;
  bool exact_normalization = false;  // cnn only: replace the estimate by enumerated Z (N <= 6)
  std::size_t validation_norm_samples = 20000;  // cnn validation Z estimate beyond the cap

  void validate(std::size_t n_samples) const {
    require(batch_size >= 1, "batch_size must be positive");
    require(batch_size <= n_samples, "batch_size exceeds the number of samples");
    require(epochs >= 0, "epochs must be non-negative");
    require(lr > 0.0 && beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && eps > 0.0,
            "invalid Adam hyperparameters");
    require(patience >= 1, "patience must be positive");
    require(validation_fraction >= 0.0 && validation_fraction <= 0.5, "validation fraction must lie in [0, 0.5]");
  }
};

struct EpochRecord {
  int epoch = 0;
  double train_nll = 0.0;
  double validation_nll = 0.0;
  double log_normalization = 0.0;  // cnn: log Z used for validation; arcnn: 0
  double wall_seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;  // entry 0 is the initialization
  int best_epoch = 0;
  double best_validation_nll = 0.0;
  bool early_stopped = false;
  std::size_t n_train = 0;
  std::size_t n_validation = 0;
};

struct TrainResult {
  nn::ModelParams params;
  TrainReport report;
};

/// Mean negative log-likelihood of the exactly normalized network.
inline nn::Var nll_loss_arcnn(nn::Graph& g, const BoundParams& p, const ArchitectureSpec& s, OutcomeBatch batch) {
  return nn::scale(g, nn::mean(g, arcnn_log_prob(g, p, s, batch)), -1.0);
}

/// -mean log P~(batch) + log Z_hat with Z_hat = (4^N / |norm|) sum_u P~(u) over uniform u.
inline nn::Var nll_loss_cnn(nn::Graph& g, const BoundParams& p, const ArchitectureSpec& s, OutcomeBatch batch,
                            OutcomeBatch norm) {
  require(norm.size() > 0, "normalization batch is empty");
  const nn::Var data = nn::mean(g, cnn_log_prob_unnormalized(g, p, s, batch));
  const nn::Var lse = nn::logsumexp(g, cnn_log_prob_unnormalized(g, p, s, norm));
  if (!std::isfinite(g.value(lse).item()))
    throw NumericalError(
        "normalization estimate underflowed or overflowed: the model is too peaked for uniform proposals; "
        "consider the flipped POVM");
  const double offset = s.n_sites() * std::log(4.0) - std::log(static_cast<double>(norm.size()));
  return nn::add_scalar(g, nn::add(g, nn::scale(g, data, -1.0), lse), offset);
}

/// Oracle variant of nll_loss_cnn with the exactly enumerated normalization.
inline nn::Var nll_loss_cnn_exact(nn::Graph& g, const BoundParams& p, const ArchitectureSpec& s, OutcomeBatch batch,
                                  std::span<const std::uint8_t> all_outcomes) {
  const nn::Var data = nn::mean(g, cnn_log_prob_unnormalized(g, p, s, batch));
  const nn::Var lse = nn::logsumexp(
      g, cnn_log_prob_unnormalized(g, p, s, OutcomeBatch{all_outcomes, static_cast<std::size_t>(s.n_sites())}));
  return nn::add(g, nn::scale(g, data, -1.0), lse);
}

/// Uniformly random outcome strings.
inline std::vector<std::uint8_t> uniform_outcomes(std::size_t count, int n, Rng& rng) {
  std::uniform_int_distribution<int> u(0, kOutcomes - 1);
  std::vector<std::uint8_t> out(count * static_cast<std::size_t>(n));
  for (auto& v : out) v = static_cast<std::uint8_t>(u(rng));
  return out;
}

namespace detail {

inline std::vector<std::uint8_t> gather_samples(const OutcomeDataset& ds, std::span<const std::size_t> idx) {
  const auto n = static_cast<std::size_t>(ds.n_qubits);
  std::vector<std::uint8_t> out(idx.size() * n);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const auto s = ds.sample(idx[k]);
    std::copy(s.begin(), s.end(), out.begin() + static_cast<std::ptrdiff_t>(k * n));
  }
  return out;
}

inline double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Log normalization used to score the cnn: exact when enumerable, otherwise a fixed uniform estimate.
inline double validation_log_z(const nn::ModelParams& p, const ArchitectureSpec& s,
                               const std::vector<std::uint8_t>& fixed_uniform) {
  if (s.n_sites() <= kExactNormalizationCap) return exact_log_normalization(p, s);
  const auto lp = evaluate_log_prob(p, s, OutcomeBatch{fixed_uniform, static_cast<std::size_t>(s.n_sites())});
  const double m = *std::max_element(lp.begin(), lp.end());
  double z = 0.0;
  for (double v : lp) z += std::exp(v - m);
  return m + std::log(z / static_cast<double>(lp.size())) + s.n_sites() * std::log(4.0);
}

}  // namespace detail

/// Negative log-likelihood per sample of `data` under the model (cnn: with the validation log Z).
inline double dataset_nll(const nn::ModelParams& p, const ArchitectureSpec& s, OutcomeBatch data,
                          double log_z = 0.0) {
  const auto lp = evaluate_log_prob(p, s, data);
  return log_z - detail::mean_of(lp);
}

/// Maximum-likelihood fit by Adam with per-epoch shuffling and early stopping on validation NLL.
inline TrainResult train(const ArchitectureSpec& spec, nn::ModelParams params, const OutcomeDataset& dataset,
                         const TrainConfig& config) {
  using clock = std::chrono::steady_clock;
  dataset.validate();
  require(dataset.n_qubits == spec.n_sites(), "dataset has " + std::to_string(dataset.n_qubits) +
                                                   " sites, architecture expects " +
                                                   std::to_string(spec.n_sites()));
  check_params(spec, params);
  const bool is_cnn = spec.kind == ModelKind::cnn;
  if (config.exact_normalization)
    require(is_cnn && spec.n_sites() <= kExactNormalizationCap, "exact normalization needs a cnn with N <= 6");
  const int n = spec.n_sites();

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  {
    Rng split = make_stream(config.seed, StreamTag::validation, 0);
    std::shuffle(order.begin(), order.end(), split);
  }
  const auto n_val = static_cast<std::size_t>(std::floor(config.validation_fraction * dataset.size()));
  std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(train_idx.begin(), train_idx.end());
  config.validate(train_idx.size());
  const auto val_data = detail::gather_samples(dataset, val_idx);
  const auto train_data = detail::gather_samples(dataset, train_idx);
  const OutcomeBatch val_batch{val_data, static_cast<std::size_t>(n)};
  const OutcomeBatch train_batch{train_data, static_cast<std::size_t>(n)};
  // Without a validation split, the full training set scores the epochs.
  const OutcomeBatch score_batch = n_val > 0 ? val_batch : train_batch;

  std::vector<std::uint8_t> fixed_uniform;
  if (is_cnn && n > kExactNormalizationCap) {
    Rng r = make_stream(config.seed, StreamTag::validation, 1);
    fixed_uniform = uniform_outcomes(config.validation_norm_samples, n, r);
  }
  const std::vector<std::uint8_t> all = config.exact_normalization ? enumerate_outcomes(n) : std::vector<std::uint8_t>{};

  auto score = [&](const nn::ModelParams& p, double& log_z) {
    log_z = is_cnn ? detail::validation_log_z(p, spec, fixed_uniform) : 0.0;
    return dataset_nll(p, spec, score_batch, log_z);
  };

  TrainResult result;
  TrainReport& rep = result.report;
  rep.n_train = train_idx.size();
  rep.n_validation = n_val;
  const auto t0 = clock::now();
  {
    EpochRecord e0;
    e0.validation_nll = score(params, e0.log_normalization);
    e0.train_nll = dataset_nll(params, spec, train_batch, e0.log_normalization);
    rep.epochs.push_back(e0);
  }
  rep.best_epoch = 0;
  rep.best_validation_nll = rep.epochs[0].validation_nll;
  nn::ModelParams best = params;

  auto adam = nn::AdamState::for_params(params, config.lr, config.beta1, config.beta2, config.eps);
  const std::size_t n_norm = config.n_norm_samples == 0 ? config.batch_size : config.n_norm_samples;
  std::vector<std::size_t> perm(train_idx.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::vector<std::uint8_t> batch_data;
  int since_best = 0;
  std::uint64_t step = 0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng shuffle = make_stream(config.seed, StreamTag::shuffle, static_cast<std::uint64_t>(epoch));
    std::shuffle(perm.begin(), perm.end(), shuffle);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    int batch_no = 0;
    for (std::size_t start = 0; start < perm.size(); start += config.batch_size, ++batch_no, ++step) {
      const std::size_t count = std::min(config.batch_size, perm.size() - start);
      batch_data.resize(count * static_cast<std::size_t>(n));
      for (std::size_t k = 0; k < count; ++k) {
        const auto src = train_batch[perm[start + k]];
        std::copy(src.begin(), src.end(), batch_data.begin() + static_cast<std::ptrdiff_t>(k * n));
      }
      const OutcomeBatch batch{batch_data, static_cast<std::size_t>(n)};
      nn::Graph g;
      const auto bound = g.bind(params);
      nn::Var loss;
      if (!is_cnn) {
        loss = nll_loss_arcnn(g, bound, spec, batch);
      } else if (config.exact_normalization) {
        loss = nll_loss_cnn_exact(g, bound, spec, batch, all);
      } else {
        Rng nr = make_stream(config.seed, StreamTag::normalization, step);
        const auto norm = uniform_outcomes(n_norm, n, nr);
        loss = nll_loss_cnn(g, bound, spec, batch, OutcomeBatch{norm, static_cast<std::size_t>(n)});
      }
      const double lv = g.value(loss).item();
      if (!std::isfinite(lv))
        throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(batch_no));
      g.backward(loss);
      nn::adam_step(params, g.grads(bound), adam);
      loss_sum += lv * static_cast<double>(count);
      seen += count;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_nll = loss_sum / static_cast<double>(seen);
    rec.validation_nll = score(params, rec.log_normalization);
    rec.wall_seconds = std::chrono::duration<double>(clock::now() - t0).count();
    if (!std::isfinite(rec.validation_nll))
      throw NumericalError("non-finite validation NLL at epoch " + std::to_string(epoch));
    rep.epochs.push_back(rec);
    if (rec.validation_nll < rep.best_validation_nll) {
      rep.best_validation_nll = rec.validation_nll;
      rep.best_epoch = epoch;
      best = params;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      rep.early_stopped = true;
      break;
    }
  }
  result.params = std::move(best);
  return result;
}

}  // namespace nqst
