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

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>

#include "nqst/bench/config.hpp"
#include "nqst/quantum/eigensolver.hpp"
#include "nqst/quantum/lindblad.hpp"
#include "nqst/quantum/states.hpp"

namespace nqst::bench {

inline std::string format_number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

/// Stable, file-name friendly identifier of a synthesized target.
inline std::string target_key(const ExperimentConfig& c, const SpinLattice& lat, double B) {
  std::string k = c.model + "_";
  k += lat.geometry == Geometry::grid ? "grid" + std::to_string(lat.rows) + "x" + std::to_string(lat.cols)
                                      : "chain" + std::to_string(lat.n_qubits());
  k += lat.boundary == Boundary::periodic ? "_pbc" : "_obc";
  k += "_J" + format_number(c.J) + "_B" + format_number(B);
  if (c.model == "ionchain") k += "_a" + format_number(c.alpha);
  if (c.model != "dissipative" && c.dephasing > 0.0) k += "_p" + format_number(c.dephasing);
  if (c.model == "dissipative") {
    k += "_g" + format_number(c.gamma) + "_" + c.solver;
    if (c.solver == "mcwf")
      k += "_M" + std::to_string(c.trajectories) + "_T" + format_number(c.t_final) + "_dt" + format_number(c.dt) +
           "_s" + std::to_string(c.seed);
  }
  for (auto& ch : k)
    if (ch == '.' || ch == '-' || ch == '+') ch = ch == '.' ? 'p' : (ch == '-' ? 'm' : 'P');
  return k;
}

inline IsingCoupling coupling_for(const ExperimentConfig& c, double B) {
  return c.model == "ionchain" ? IsingCoupling::long_range(c.J, c.alpha, B) : IsingCoupling::nearest_neighbor(c.J, B);
}

/// Computes the target state from scratch.
inline Target synthesize_target(const ExperimentConfig& c, const SpinLattice& lat, double B) {
  if (c.model == "dissipative") {
    const LindbladSpec spec{lat, IsingCoupling::nearest_neighbor(c.J, B), c.gamma};
    if (c.solver == "exact") return exact_steady_state(spec);
    return mcwf_trajectories(spec, {c.t_final, c.dt, c.trajectories, c.seed});
  }
  const auto gs = ground_state(build_ising_hamiltonian(lat, coupling_for(c, B)));
  if (c.dephasing > 0.0) return dephase(gs.state, c.dephasing);
  return gs.state;
}

/// Target as stored on disk. Targets are always used in their serialized precision, so a run
/// gives identical results whether or not the cache was warm. `cache_dir` empty means
/// `fallback_dir`.
inline Target obtain_target(const ExperimentConfig& c, const SpinLattice& lat, double B, const std::string& cache_dir,
                            const std::string& fallback_dir, bool* cache_hit = nullptr) {
  namespace fs = std::filesystem;
  const fs::path dir = cache_dir.empty() ? fs::path(fallback_dir) : fs::path(cache_dir);
  fs::create_directories(dir);
  const fs::path file = dir / (target_key(c, lat, B) + ".state");
  const bool hit = fs::exists(file);
  if (cache_hit) *cache_hit = hit;
  if (!hit) {
    const fs::path tmp = file.string() + ".tmp";
    save_state(tmp.string(), synthesize_target(c, lat, B));
    fs::rename(tmp, file);
  }
  return load_state(file.string());
}

inline std::string cache_dir_from_env() {
  const char* v = std::getenv("TOMO_CACHE_DIR");
  return v == nullptr ? std::string() : std::string(v);
}

}  // namespace nqst::bench
