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

#include <boost/math/distributions/chi_squared.hpp>
#include <cstddef>
#include <vector>

#include "nqst/povm/dataset.hpp"

namespace testing_util {

// Pearson chi-square p-value; bins expecting fewer than 5 counts are pooled.
inline double chi_square_pvalue(const std::vector<double>& expected_probs, const std::vector<std::size_t>& counts,
                                std::size_t total) {
  double stat = 0.0;
  int dof = -1;
  double pooled_e = 0.0, pooled_o = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double e = expected_probs[i] * static_cast<double>(total);
    if (e < 5.0) {
      pooled_e += e;
      pooled_o += static_cast<double>(counts[i]);
      continue;
    }
    stat += (static_cast<double>(counts[i]) - e) * (static_cast<double>(counts[i]) - e) / e;
    ++dof;
  }
  if (pooled_e > 0.0) {
    stat += (pooled_o - pooled_e) * (pooled_o - pooled_e) / pooled_e;
    ++dof;
  }
  boost::math::chi_squared dist(dof);
  return boost::math::cdf(boost::math::complement(dist, stat));
}

inline double chi_square_pvalue(const std::vector<double>& expected_probs, const nqst::OutcomeDataset& ds) {
  std::vector<std::size_t> counts(expected_probs.size(), 0);
  for (std::size_t i = 0; i < ds.size(); ++i) ++counts[nqst::outcome_index(ds.sample(i))];
  return chi_square_pvalue(expected_probs, counts, ds.size());
}

// Standard error of a mean from correlated values via non-overlapping batch means.
inline double batch_means_error(const std::vector<double>& v, std::size_t batches = 50) {
  const std::size_t len = v.size() / batches;
  std::vector<double> means(batches, 0.0);
  for (std::size_t b = 0; b < batches; ++b) {
    for (std::size_t i = 0; i < len; ++i) means[b] += v[b * len + i];
    means[b] /= static_cast<double>(len);
  }
  double m = 0.0, ss = 0.0;
  for (double x : means) m += x / static_cast<double>(batches);
  for (double x : means) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(batches - 1) / static_cast<double>(batches));
}

}  // namespace testing_util
