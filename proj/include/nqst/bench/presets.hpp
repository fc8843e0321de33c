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

#include <map>
#include <string>
#include <vector>

#include "nqst/bench/config.hpp"

namespace nqst::bench {

struct Preset {
  std::string name;
  std::string summary;
  ExperimentConfig config;
};

inline std::vector<Preset> presets() {
  std::vector<Preset> out;

  {  // Small periodic chains: network vs MLE classical infidelity.
    ExperimentConfig c;
    c.id = "ising1d";
    c.pipeline = Pipeline::fidelity;
    c.model = "tfim";
    c.lattice = Geometry::chain;
    c.sizes = {4, 6};
    c.boundary = Boundary::periodic;
    c.J = 1.0;
    c.B = 1.0;
    c.dataset_sizes = {1000, 10000};
    c.kind = ModelKind::cnn;
    c.net_boundary = ConvBoundary::circular;
    c.head = OutputHead::product;
    c.train.epochs = 2000;
    c.train.lr = 1e-3;
    c.train.patience = 200;
    c.metrics = {"infidelity", "mle"};
    out.push_back({"ising1d", "1D periodic TFIM, J/B=1: D_NN vs D_MLE per (N, N_s)", c});
  }
  {  // 4x4 periodic lattice: local observables from the network vs the dataset.
    ExperimentConfig c;
    c.id = "ising2d";
    c.pipeline = Pipeline::observables;
    c.model = "tfim";
    c.lattice = Geometry::grid;
    c.rows = 4;
    c.cols = 4;
    c.boundary = Boundary::periodic;
    c.J = 0.3;
    c.B = 1.0;
    c.dataset_sizes = {10000};
    c.kind = ModelKind::cnn;
    c.layers = 2;
    c.kernel = 2;
    c.features = 16;
    c.net_boundary = ConvBoundary::circular;
    c.head = OutputHead::product;
    c.train.epochs = 200;
    c.train.lr = 5e-3;
    c.train.patience = 20;
    c.network_samples = 100000;
    c.metrics = {"network", "bond_zz", "xi_full"};
    out.push_back({"ising2d", "4x4 periodic TFIM, J/B=0.3: RMS of local observables, network vs data", c});
  }
  {  // Long-range ion chain with dephasing: correlator powers C_n.
    ExperimentConfig c;
    c.id = "ionchain";
    c.pipeline = Pipeline::observables;
    c.model = "ionchain";
    c.lattice = Geometry::chain;
    c.sizes = {16};
    c.boundary = Boundary::open;
    c.J = 0.6;
    c.B = 1.0;
    c.alpha = 1.1;
    c.dephasing = 0.03;
    c.dataset_sizes = {10000};
    c.kind = ModelKind::arcnn;
    c.layers = 3;
    c.kernel = 6;
    c.features = 16;
    c.train.epochs = 400;
    c.train.lr = 5e-4;
    c.train.patience = 50;
    c.network_samples = 500000;
    c.metrics = {"network", "correlators"};
    c.max_order = 8;
    c.local_mle_max_order = 4;
    out.push_back({"ionchain", "16-site ion chain, alpha=1.1, J/B=0.6, 3% dephasing: C_n RMS network vs data", c});
  }
  {  // 4x4 dissipative sweep over the drive.
    ExperimentConfig c;
    c.id = "steady";
    c.pipeline = Pipeline::steady;
    c.model = "dissipative";
    c.lattice = Geometry::grid;
    c.rows = 4;
    c.cols = 4;
    c.boundary = Boundary::open;
    c.J = -1.25;
    c.gamma = 1.0;
    c.fields = {-0.5, -1.0, -1.5, -2.0, -2.5, -3.0, -4.0};
    c.solver = "mcwf";
    c.trajectories = 100;
    c.t_final = 10.0;
    c.dt = 0.01;
    c.flip = FlipMode::automatic;
    c.dataset_sizes = {1000};
    c.kind = ModelKind::cnn;
    c.layers = 2;
    c.kernel = 3;
    c.features = 16;
    c.net_boundary = ConvBoundary::open;
    c.head = OutputHead::dense;
    c.train.epochs = 200;
    c.train.lr = 5e-3;
    c.train.patience = 20;
    c.network_samples = 20000;
    c.metrics = {"network", "xi_diag", "xi_full"};
    out.push_back({"steady", "4x4 dissipative TFIM, J=1.25 gamma, MCWF targets: xi^2 sweep over B (hours)", c});
  }
  {  // Reduced-scale steady states with exact Liouvillian targets.
    ExperimentConfig c = out.back().config;
    c.id = "steady-small";
    c.rows = 2;
    c.cols = 3;
    c.solver = "exact";
    c.fields = {-0.5, -2.0, -4.0};
    c.features = 6;
    c.network_samples = 20000;
    c.metrics = {"network", "xi_diag", "xi_full"};
    out.push_back({"steady-small", "2x3 dissipative TFIM with exact steady states: xi^2 network vs data", c});
  }
  return out;
}

inline ExperimentConfig preset(const std::string& name) {
  for (const auto& p : presets())
    if (p.name == name) return p.config;
  throw ConfigError("unknown preset '" + name + "' (see `presets list`)");
}

/// Config from a file; `[experiment] preset = name` starts from that preset.
inline ExperimentConfig load_config(const std::string& path) {
  KeyValues kv = read_config_file(path);
  ExperimentConfig base;
  if (auto it = kv.find("experiment.preset"); it != kv.end()) {
    base = preset(detail::trim(it->second));
    kv.erase(it);
  }
  auto c = apply_config(base, kv);
  c.validate();
  return c;
}

}  // namespace nqst::bench
