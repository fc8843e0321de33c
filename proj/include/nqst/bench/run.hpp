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
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "nqst/bench/config.hpp"
#include "nqst/bench/flip.hpp"
#include "nqst/bench/targets.hpp"
#include "nqst/estimation/estimators.hpp"
#include "nqst/mle/mle.hpp"
#include "nqst/povm/born_sampler.hpp"
#include "nqst/sampling/arcnn_sampler.hpp"
#include "nqst/sampling/mcmc.hpp"
#include "nqst/training/train.hpp"

namespace nqst::bench {

using Cell = std::variant<double, std::string>;

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  std::size_t column(const std::string& c) const {
    const auto it = std::find(columns.begin(), columns.end(), c);
    if (it == columns.end()) throw ConfigError("table " + name + " has no column " + c);
    return static_cast<std::size_t>(it - columns.begin());
  }
  double number(std::size_t row, const std::string& c) const { return std::get<double>(rows[row][column(c)]); }
  const std::string& text(std::size_t row, const std::string& c) const {
    return std::get<std::string>(rows[row][column(c)]);
  }
};

struct RunOptions {
  std::string output_dir;       // empty means ./runs/<id>
  std::string cache_dir;        // empty means no shared cache (targets stay in the run directory)
  bool dry_run = false;
  std::function<void(const std::string&)> log;  // progress lines; may be empty
};

struct RunSummary {
  std::vector<std::string> plan;
  std::vector<MetricsRecord> metrics;
  std::vector<Table> tables;
  std::string output_dir;

  const Table& table(const std::string& name) const {
    for (const auto& t : tables)
      if (t.name == name) return t;
    throw ConfigError("run produced no table " + name);
  }
};

/// Stage failure: carries the stage name and keeps the error category of the cause.
template <class E>
[[noreturn]] inline void rethrow_in_stage(const std::string& stage, const E& e) {
  throw E("stage '" + stage + "': " + e.what());
}

namespace detail {

inline std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string cell_text(const Cell& c) {
  return std::holds_alternative<double>(c) ? fmt(std::get<double>(c)) : std::get<std::string>(c);
}

inline void write_table(const std::filesystem::path& path, const Table& t) {
  std::ofstream out(path);
  for (std::size_t i = 0; i < t.columns.size(); ++i) out << (i ? "," : "") << t.columns[i];
  out << "\n";
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << cell_text(row[i]);
    out << "\n";
  }
  if (!out) throw ConfigError("failed writing " + path.string());
}

class MetricsSink {
 public:
  void open(const std::filesystem::path& path) {
    out_.open(path, std::ios::trunc);
    if (!out_) throw ConfigError("cannot write " + path.string());
    out_ << "metric,value,stderr,n_samples,seed\n";
  }
  void add(RunSummary& summary, MetricsRecord r) {
    if (out_.is_open()) {
      out_ << r.metric << "," << fmt(r.value) << "," << fmt(r.std_error) << "," << r.n_samples << "," << r.seed << "\n";
      out_.flush();
    }
    summary.metrics.push_back(std::move(r));
  }

 private:
  std::ofstream out_;
};

// Directory ownership for the duration of one run.
class Lockfile {
 public:
  explicit Lockfile(std::filesystem::path p) : path_(std::move(p)) {
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (f == nullptr)
      throw ConfigError("output directory is locked by another run (" + path_.string() +
                        "); remove the file if no run is active");
    std::fclose(f);
  }
  ~Lockfile() {
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }
  Lockfile(const Lockfile&) = delete;
  Lockfile& operator=(const Lockfile&) = delete;

 private:
  std::filesystem::path path_;
};

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  Rng rng = make_stream(seed, StreamTag::misc, (a << 40) ^ (b << 20) ^ c);
  return rng();
}

inline double mean(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x / static_cast<double>(v.size());
  return m;
}

inline double std_error(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

// An observable compared between truth, dataset, network samples and (optionally) local MLE.
struct ObservableDef {
  std::string name;
  double truth = 0.0;
  double weight_sum = 0.0;  // xi^2 only: sum of |r_i - r_j|^2 over the pairs
  std::function<Estimate(const OutcomeDataset&, const PovmSpec&)> estimate;
  std::function<double(const OutcomeDataset&, const PovmSpec&)> local_mle;  // may be empty
};

inline Estimate bond_zz_estimate(const OutcomeDataset& ds, const SpinLattice& lat, const PovmSpec& povm) {
  const Eigen::VectorXd z = povm.representation(pauli::z());
  const auto bonds = lat.bonds();
  std::vector<double> v(ds.size());
  for (std::size_t s = 0; s < ds.size(); ++s) {
    const auto a = ds.sample(s);
    double acc = 0.0;
    for (auto [i, j] : bonds) acc += z(a[static_cast<std::size_t>(i)]) * z(a[static_cast<std::size_t>(j)]);
    v[s] = acc / static_cast<double>(bonds.size());
  }
  return {mean(v), std_error(v)};
}

// C_n from local reconstructions of every window of n consecutive sites.
inline double local_mle_correlator(const OutcomeDataset& ds, int order, const PovmSpec& povm) {
  const int terms = ds.n_qubits - order + 1;
  std::vector<int> all(static_cast<std::size_t>(order));
  std::iota(all.begin(), all.end(), 0);
  double acc = 0.0;
  for (int i = 0; i < terms; ++i) {
    std::vector<int> window(static_cast<std::size_t>(order));
    std::iota(window.begin(), window.end(), i);
    const auto r = local_mle(ds, window, povm);
    acc += z_string_expectation(r.rho, all);
  }
  return acc / terms;
}

inline std::vector<ObservableDef> observables_for(const ExperimentConfig& c, const SpinLattice& lat, const Target& t) {
  std::vector<ObservableDef> defs;
  const int n = lat.n_qubits();
  if (c.wants("correlators"))
    for (int order = 1; order <= c.max_order; ++order) {
      ObservableDef d;
      d.name = "C" + std::to_string(order);
      d.truth = exact_correlator_power(t, order);
      d.estimate = [order](const OutcomeDataset& ds, const PovmSpec& p) { return correlator_powers(ds, order, p); };
      if (order <= c.local_mle_max_order)
        d.local_mle = [order](const OutcomeDataset& ds, const PovmSpec& p) {
          return local_mle_correlator(ds, order, p);
        };
      defs.push_back(std::move(d));
    }
  if (c.wants("bond_zz")) {
    ObservableDef d;
    d.name = "bond_zz";
    const auto bonds = lat.bonds();
    for (auto [i, j] : bonds) {
      const int s[] = {i, j};
      d.truth += z_string_expectation(t, s) / static_cast<double>(bonds.size());
    }
    d.estimate = [lat](const OutcomeDataset& ds, const PovmSpec& p) { return bond_zz_estimate(ds, lat, p); };
    defs.push_back(std::move(d));
  }
  for (auto [metric, subset] : {std::pair{"xi_diag", SiteSubset::main_diagonal}, std::pair{"xi_full", SiteSubset::full_lattice}}) {
    if (!c.wants(metric)) continue;
    ObservableDef d;
    d.name = metric;
    d.truth = exact_correlation_length_sq(t, lat, subset);
    for (const auto& w : correlation_pairs(lat, subset)) d.weight_sum += w.weight;
    d.estimate = [lat, subset](const OutcomeDataset& ds, const PovmSpec& p) {
      return correlation_length_sq(ds, lat, subset, p);
    };
    defs.push_back(std::move(d));
  }
  (void)n;
  return defs;
}

}  // namespace detail

/// Resolved settings and ledger defaults that influenced the run.
inline nlohmann::json manifest_defaults(const ExperimentConfig& c) {
  nlohmann::json m;
  m["rng"] = {{"engine", "mt19937_64 seeded by seed_seq(seed, stream tag, index)"},
              {"samples_per_stream", kSamplesPerStream},
              {"repetition_seed", "derived from (experiment.seed, system index, N_s index, repetition)"}};
  m["povm"] = {{"family", "pauli4"},
               {"outcome_order", "site 0 most significant; element a = (I + s_a sigma_a) / 6, a < 3"},
               {"flip", flip_name(c.flip)},
               {"flip_threshold", c.flip_threshold},
               {"pilot_samples", c.pilot_samples}};
  m["architecture"] = {{"rule", "L = round(sqrt N), K = ceil(sqrt N) + 1, F = N unless set"},
                       {"activation", "tanh"},
                       {"cnn_output", "exp of the summed (product) or dense head"},
                       {"arcnn_padding", "first layer causal shifted by one, later layers causal"},
                       {"init", "uniform(-sqrt(1/fan_in), sqrt(1/fan_in)) kernels, zero biases"}};
  const std::size_t norm = c.train.n_norm_samples == 0 ? c.train.batch_size : c.train.n_norm_samples;
  m["train"] = {{"optimizer", "adam"},
                {"lr", c.train.lr},
                {"beta1", c.train.beta1},
                {"beta2", c.train.beta2},
                {"eps", c.train.eps},
                {"batch_size", c.train.batch_size},
                {"epochs", c.train.epochs},
                {"patience", c.train.patience},
                {"validation_fraction", c.train.validation_fraction},
                {"cnn_normalization_samples_per_batch", norm},
                {"cnn_exact_validation_normalization_max_sites", kExactNormalizationCap},
                {"cnn_validation_normalization_samples", c.train.validation_norm_samples},
                {"model_selection", "parameters of the best validation epoch"}};
  m["sampling"] = {{"arcnn", "exact ancestral sampling"},
                   {"cnn", "Metropolis, single-site uniform redraw"},
                   {"chains", c.chains},
                   {"burn_in", c.burn_in < 0 ? "40 N" : std::to_string(c.burn_in)},
                   {"thinning", c.thinning < 0 ? "N" : std::to_string(c.thinning)},
                   {"network_samples", c.network_samples}};
  const MleConfig mle;
  m["mle"] = {{"algorithm", "R rho R fixed point with dense factorized probabilities"},
              {"max_iterations", mle.max_iterations},
              {"tolerance", mle.tolerance},
              {"epsilon_mixing", mle.epsilon},
              {"stop_rule", "first non-ascending step keeps the previous iterate"},
              {"max_qubits", kMleQubitCap},
              {"local_max_sites", kLocalMleSiteCap}};
  m["estimation"] = {{"observable_stderr", "sample standard deviation / sqrt(N_s)"},
                     {"xi_stderr", "delete-one block jackknife"},
                     {"jackknife_blocks", kJackknifeBlocks},
                     {"rms", "over repetitions against the exact target value"}};
  m["targets"] = {{"ground_state", "dense below 12 qubits, Lanczos otherwise"},
                  {"storage", "complex64 state files, renormalized on load"},
                  {"dephasing", "rho = (1 - p) |psi><psi| + p 1 / 2^N"}};
  if (c.model == "dissipative")
    m["targets"]["steady_state"] = c.solver == "exact"
                                       ? nlohmann::json("null space of the vectorized Liouvillian")
                                       : nlohmann::json({{"method", "MCWF, RK4 no-jump propagation, start all down"},
                                                         {"trajectories", c.trajectories},
                                                         {"t_final", c.t_final},
                                                         {"dt", c.dt}});
  m["concurrency"] = "stages and repetitions run sequentially";
  return m;
}

inline nlohmann::json config_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["experiment"] = {{"id", c.id}, {"pipeline", pipeline_name(c.pipeline)}, {"repetitions", c.repetitions},
                     {"seed", c.seed}};
  j["target"] = {{"model", c.model},
                 {"lattice", c.lattice == Geometry::grid ? "grid" : "chain"},
                 {"sizes", c.sizes},
                 {"rows", c.rows},
                 {"cols", c.cols},
                 {"boundary", c.boundary == Boundary::periodic ? "periodic" : "open"},
                 {"J", c.J},
                 {"B", c.B},
                 {"fields", c.fields},
                 {"alpha", c.alpha},
                 {"dephasing", c.dephasing},
                 {"gamma", c.gamma},
                 {"solver", c.solver},
                 {"trajectories", c.trajectories},
                 {"t_final", c.t_final},
                 {"dt", c.dt}};
  j["dataset"] = {{"sizes", c.dataset_sizes}};
  j["model"] = {{"kind", c.kind == ModelKind::arcnn ? "arcnn" : "cnn"},
                {"layers", c.layers},
                {"kernel", c.kernel},
                {"features", c.features},
                {"boundary", c.net_boundary == ConvBoundary::circular ? "circular" : "open"},
                {"head", c.head == OutputHead::dense ? "dense" : "product"}};
  j["metrics"] = {{"list", c.metrics}, {"max_order", c.max_order}, {"local_mle_max_order", c.local_mle_max_order}};
  return j;
}

namespace detail {

class Runner {
 public:
  Runner(const ExperimentConfig& c, const RunOptions& o) : c_(c), o_(o) {}

  RunSummary run() {
    c_.validate();
    plan();
    if (o_.dry_run) return summary_;
    namespace fs = std::filesystem;
    dir_ = o_.output_dir.empty() ? fs::path("runs") / c_.id : fs::path(o_.output_dir);
    fs::create_directories(dir_);
    summary_.output_dir = dir_.string();
    Lockfile lock(dir_ / ".lock");
    sink_.open(dir_ / "metrics.csv");
    manifest_["config"] = config_json(c_);
    manifest_["defaults"] = manifest_defaults(c_);
    manifest_["plan"] = summary_.plan;
    try {
      switch (c_.pipeline) {
        case Pipeline::fidelity: fidelity(); break;
        case Pipeline::observables: observables(); break;
        case Pipeline::steady: steady(); break;
      }
    } catch (const Error& e) {
      manifest_["status"] = std::string("failed: ") + e.what();
      finish();
      throw;
    }
    manifest_["status"] = "complete";
    finish();
    return summary_;
  }

 private:
  void say(const std::string& s) const {
    if (o_.log) o_.log(s);
  }

  template <class F>
  auto stage(const std::string& name, F&& f) -> decltype(f()) {
    current_stage_ = name;
    try {
      return f();
    } catch (const ConfigError& e) {
      rethrow_in_stage(name, e);
    } catch (const NumericalError& e) {
      rethrow_in_stage(name, e);
    }
  }

  void plan() {
    auto& p = summary_.plan;
    const std::string povm = c_.flip == FlipMode::automatic ? "pauli4 (flip decided from a pilot dataset)"
                                                            : pauli4(c_.flip == FlipMode::yes).id();
    std::vector<double> fields = c_.pipeline == Pipeline::steady ? c_.fields : std::vector<double>{c_.B};
    for (int n : c_.system_sizes())
      for (double B : fields) {
        const auto lat = c_.lattice_for(n);
        p.push_back("synthesize " + target_key(c_, lat, B));
        const auto arch = c_.architecture_for(n);
        for (auto ns : c_.dataset_sizes) {
          p.push_back("  sample " + std::to_string(c_.repetitions) + " datasets of N_s=" + std::to_string(ns) + " with " +
                      povm);
          if (c_.wants("infidelity") || c_.wants("network"))
            p.push_back("  train " + arch.describe() + " (" + std::to_string(parameter_count(arch)) + " parameters)");
          if (c_.wants("network") && c_.pipeline != Pipeline::fidelity)
            p.push_back("  draw " + std::to_string(c_.network_samples) + " network samples (" +
                        (arch.kind == ModelKind::arcnn ? "ancestral" : "Metropolis") + ")");
          if (c_.wants("mle") && c_.pipeline == Pipeline::fidelity) p.push_back("  MLE baseline");
        }
      }
    p.push_back("write metrics.csv, tables and manifest.json");
  }

  void finish() {
    for (const auto& t : summary_.tables) write_table(dir_ / (t.name + ".csv"), t);
    manifest_["outputs"] = nlohmann::json::array();
    manifest_["outputs"].push_back("metrics.csv");
    for (const auto& t : summary_.tables) manifest_["outputs"].push_back(t.name + ".csv");
    manifest_["flip_decisions"] = flips_;
    std::ofstream out(dir_ / "manifest.json");
    out << manifest_.dump(2) << "\n";
  }

  void record(const std::string& metric, double value, double se, std::size_t ns, std::uint64_t seed) {
    sink_.add(summary_, {metric, value, se, ns, seed, "run"});
  }

  Target target(const SpinLattice& lat, double B) {
    return stage("synthesize", [&] {
      bool hit = false;
      say("target " + target_key(c_, lat, B));
      auto t = obtain_target(c_, lat, B, o_.cache_dir, (dir_ / "targets").string(), &hit);
      if (hit) say("  (cached)");
      return t;
    });
  }

  PovmSpec choose_povm(const Target& t, const std::string& label, std::uint64_t seed) {
    if (c_.flip != FlipMode::automatic) return pauli4(c_.flip == FlipMode::yes);
    return stage("flip decision", [&] {
      const auto pilot = sample_outcomes(t, pauli4(false), c_.pilot_samples, seed);
      const auto d = single_site_diagnostics(single_site_frequencies(pilot));
      const bool flip = d.min_frequency < c_.flip_threshold;
      flips_[label] = {{"flipped", flip}, {"min_single_site_frequency", d.min_frequency}, {"site", d.site},
                       {"outcome", d.outcome}};
      record("pilot_min_frequency/" + label, d.min_frequency, 0.0, c_.pilot_samples, seed);
      return pauli4(flip);
    });
  }

  TrainResult fit(const ArchitectureSpec& arch, const OutcomeDataset& ds, std::uint64_t seed) {
    return stage("train", [&] {
      TrainConfig tc = c_.train;
      tc.seed = seed;
      auto r = train(arch, init_params(arch, seed), ds, tc);
      say("  trained " + std::to_string(r.report.epochs.size() - 1) + " epochs, best validation NLL " +
          fmt(r.report.best_validation_nll));
      return r;
    });
  }

  OutcomeDataset network_samples(const ArchitectureSpec& arch, const nn::ModelParams& p, std::uint32_t code,
                                 std::uint64_t seed) {
    return stage("sample", [&] {
      if (arch.kind == ModelKind::arcnn) return sample_arcnn(p, arch, c_.network_samples, seed, nullptr, code);
      ChainConfig cc;
      cc.n_chains = c_.chains;
      cc.burn_in = c_.burn_in;
      cc.thinning = c_.thinning;
      cc.seed = seed;
      return sample_cnn_mcmc(p, arch, c_.network_samples, cc, nullptr, code);
    });
  }

  void fidelity() {
    Table t{"infidelity", {"N", "N_s", "D_NN", "D_NN_stderr", "D_MLE", "D_MLE_stderr", "ratio", "ratio_stderr"}, {}};
    const auto sizes = c_.system_sizes();
    for (std::size_t si = 0; si < sizes.size(); ++si) {
      const int n = sizes[si];
      const auto lat = c_.lattice_for(n);
      const Target target_state = target(lat, c_.B);
      const std::string tag = "N=" + std::to_string(n);
      const PovmSpec povm = choose_povm(target_state, tag, derive_seed(c_.seed, si, 999, 0));
      const auto P = stage("estimate", [&] { return exact_distribution(target_state, povm); });
      const auto arch = c_.architecture_for(n);
      for (std::size_t ni = 0; ni < c_.dataset_sizes.size(); ++ni) {
        const std::size_t ns = c_.dataset_sizes[ni];
        std::vector<double> dnn, dmle, ratio;
        for (int r = 0; r < c_.repetitions; ++r) {
          const std::uint64_t seed = derive_seed(c_.seed, si, ni, static_cast<std::uint64_t>(r));
          const std::string label = tag + "/Ns=" + std::to_string(ns) + "/rep=" + std::to_string(r);
          say(label);
          const auto ds = stage("sample-target", [&] { return sample_outcomes(target_state, povm, ns, seed); });
          if (c_.wants("infidelity")) {
            const auto fitres = fit(arch, ds, seed);
            dnn.push_back(stage("estimate", [&] { return classical_infidelity(model_distribution(fitres.params, arch), P); }));
            record("D_NN/" + label, dnn.back(), 0.0, ns, seed);
          }
          if (c_.wants("mle")) {
            dmle.push_back(stage("mle", [&] {
              return classical_infidelity(exact_distribution(mle_reconstruct(ds, povm).rho, povm), P);
            }));
            record("D_MLE/" + label, dmle.back(), 0.0, ns, seed);
          }
          if (!dnn.empty() && !dmle.empty()) {
            ratio.push_back(dnn.back() / dmle.back());
            record("ratio/" + label, ratio.back(), 0.0, ns, seed);
          }
        }
        auto m_or_nan = [](const std::vector<double>& v) { return v.empty() ? std::nan("") : mean(v); };
        t.rows.push_back({static_cast<double>(n), static_cast<double>(ns), m_or_nan(dnn), std_error(dnn),
                          m_or_nan(dmle), std_error(dmle), m_or_nan(ratio), std_error(ratio)});
      }
    }
    summary_.tables.push_back(std::move(t));
  }

  // Shared by the observables and steady pipelines: one target, all dataset sizes.
  void compare_observables(Table& t, const std::vector<Cell>& prefix, const SpinLattice& lat, const Target& target_state,
                           const PovmSpec& povm, std::uint64_t system_index, const std::string& tag) {
    const auto defs = stage("estimate", [&] { return observables_for(c_, lat, target_state); });
    const int n = lat.n_qubits();
    const auto arch = c_.architecture_for(n);
    for (std::size_t ni = 0; ni < c_.dataset_sizes.size(); ++ni) {
      const std::size_t ns = c_.dataset_sizes[ni];
      const std::size_t k = defs.size();
      std::vector<std::vector<double>> data(k), data_se(k), net(k), mle_data(k), mle_net(k);
      for (int r = 0; r < c_.repetitions; ++r) {
        const std::uint64_t seed = derive_seed(c_.seed, system_index, ni, static_cast<std::uint64_t>(r));
        const std::string label = tag + "Ns=" + std::to_string(ns) + "/rep=" + std::to_string(r);
        say(label);
        const auto ds = stage("sample-target", [&] { return sample_outcomes(target_state, povm, ns, seed); });
        std::optional<OutcomeDataset> nds;
        if (c_.wants("network")) {
          const auto fitres = fit(arch, ds, seed);
          nds = network_samples(arch, fitres.params, povm.code(), derive_seed(seed, 1, 0, 0));
        }
        stage("estimate", [&] {
          for (std::size_t o = 0; o < k; ++o) {
            const auto e = defs[o].estimate(ds, povm);
            data[o].push_back(e.value);
            data_se[o].push_back(e.std_error);
            record(defs[o].name + "/data/" + label, e.value, e.std_error, ns, seed);
            if (nds) {
              const auto en = defs[o].estimate(*nds, povm);
              net[o].push_back(en.value);
              record(defs[o].name + "/network/" + label, en.value, en.std_error, nds->size(), seed);
            }
            if (defs[o].local_mle) {
              mle_data[o].push_back(defs[o].local_mle(ds, povm));
              record(defs[o].name + "/local_mle_data/" + label, mle_data[o].back(), 0.0, ns, seed);
              if (nds) {
                mle_net[o].push_back(defs[o].local_mle(*nds, povm));
                record(defs[o].name + "/local_mle_network/" + label, mle_net[o].back(), 0.0, nds->size(), seed);
              }
            }
          }
          return 0;
        });
      }
      for (std::size_t o = 0; o < k; ++o) {
        const double nan = std::nan("");
        auto rms = [&](const std::vector<double>& v) { return v.size() < 2 ? nan : rms_error(v, defs[o].truth); };
        auto avg = [&](const std::vector<double>& v) { return v.empty() ? nan : mean(v); };
        std::vector<Cell> row = prefix;
        for (Cell x : std::vector<Cell>{static_cast<double>(ns), defs[o].name, defs[o].truth, avg(data[o]),
                                        avg(data_se[o]), avg(net[o]), rms(data[o]), rms(net[o]),
                                        rms(net[o]) / rms(data[o]), avg(mle_data[o]), avg(mle_net[o]),
                                        rms(mle_data[o]), rms(mle_net[o]), defs[o].weight_sum})
          row.push_back(std::move(x));
        t.rows.push_back(std::move(row));
      }
    }
  }

  static std::vector<std::string> observable_columns(std::vector<std::string> prefix) {
    for (const char* c : {"N_s", "observable", "truth", "data", "data_stderr", "network", "rms_data", "rms_network",
                          "rms_ratio", "local_mle_data", "local_mle_network", "rms_local_mle_data",
                          "rms_local_mle_network", "weight_sum"})
      prefix.push_back(c);
    return prefix;
  }

  void observables() {
    Table t{"observables", observable_columns({"N"}), {}};
    const auto sizes = c_.system_sizes();
    for (std::size_t si = 0; si < sizes.size(); ++si) {
      const auto lat = c_.lattice_for(sizes[si]);
      const Target target_state = target(lat, c_.B);
      const std::string tag = "N=" + std::to_string(sizes[si]);
      const PovmSpec povm = choose_povm(target_state, tag, derive_seed(c_.seed, si, 999, 0));
      compare_observables(t, {static_cast<double>(sizes[si])}, lat, target_state, povm, si, tag + "/");
    }
    summary_.tables.push_back(std::move(t));
  }

  void steady() {
    Table t{"steady", observable_columns({"B", "flipped"}), {}};
    const auto lat = c_.lattice_for(0);
    for (std::size_t fi = 0; fi < c_.fields.size(); ++fi) {
      const double B = c_.fields[fi];
      const Target target_state = target(lat, B);
      const std::string tag = "B=" + format_number(B);
      const PovmSpec povm = choose_povm(target_state, tag, derive_seed(c_.seed, fi, 999, 0));
      compare_observables(t, {B, povm.flipped ? 1.0 : 0.0}, lat, target_state, povm, fi, tag + "/");
    }
    summary_.tables.push_back(std::move(t));
  }

  const ExperimentConfig& c_;
  const RunOptions& o_;
  RunSummary summary_;
  std::filesystem::path dir_;
  MetricsSink sink_;
  nlohmann::json manifest_;
  nlohmann::json flips_ = nlohmann::json::object();
  std::string current_stage_;
};

}  // namespace detail

/// Executes the configured pipeline. Results are deterministic in (config, seeds); the output
/// directory receives metrics.csv, one CSV per table, manifest.json and (without a shared cache)
/// the synthesized targets.
inline RunSummary run_experiment(const ExperimentConfig& config, const RunOptions& options = {}) {
  return detail::Runner(config, options).run();
}

}  // namespace nqst::bench
