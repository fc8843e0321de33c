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

// Experiment description files.
//
// The canonical encoding is INI-style text with one section per pipeline stage:
//
//   [experiment]  id, pipeline (fidelity | observables | steady), preset, repetitions, seed
//   [target]      model (tfim | ionchain | dissipative), lattice (chain | grid), sizes, rows,
//                 cols, boundary, J, B, fields, alpha, dephasing, gamma, solver (exact | mcwf),
//                 trajectories, t_final, dt
//   [povm]        flip (no | yes | auto), flip_threshold, pilot_samples
//   [dataset]     sizes
//   [model]       kind (cnn | arcnn), layers, kernel, features, boundary, head
//   [train]       epochs, batch_size, lr, patience, validation_fraction, norm_samples
//   [sampling]    network_samples, chains, burn_in, thinning
//   [metrics]     list (infidelity, mle, network, correlators, bond_zz, xi_diag, xi_full), max_order,
//                 local_mle_max_order
//
// Lists are comma separated. `layers`, `kernel` and `features` accept `auto`, which selects
// L = round(sqrt N), K = ceil(sqrt N) + 1, F = N. JSON is accepted as the same schema with
// one object per section; JSON arrays stand for lists.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "nqst/error.hpp"
#include "nqst/models/architecture.hpp"
#include "nqst/quantum/lattice.hpp"
#include "nqst/training/train.hpp"

namespace nqst::bench {

enum class Pipeline { fidelity, observables, steady };
enum class FlipMode { no, yes, automatic };

inline constexpr double kDefaultFlipThreshold = 1e-4;

using KeyValues = std::map<std::string, std::string>;  // "section.key" -> raw value

struct ExperimentConfig {
  std::string id = "experiment";
  Pipeline pipeline = Pipeline::fidelity;
  int repetitions = 5;
  std::uint64_t seed = 1;

  // target
  std::string model = "tfim";
  Geometry lattice = Geometry::chain;
  std::vector<int> sizes = {4};
  int rows = 0;
  int cols = 0;
  Boundary boundary = Boundary::periodic;
  double J = 1.0;
  double B = 1.0;
  std::vector<double> fields;
  double alpha = 1.1;
  double dephasing = 0.0;
  double gamma = 1.0;
  std::string solver = "exact";
  int trajectories = 1000;
  double t_final = 20.0;
  double dt = 0.005;

  FlipMode flip = FlipMode::no;
  double flip_threshold = kDefaultFlipThreshold;
  std::size_t pilot_samples = 10000;

  std::vector<std::size_t> dataset_sizes = {1000};

  ModelKind kind = ModelKind::cnn;
  int layers = 0;  // 0 means auto
  int kernel = 0;
  int features = 0;
  ConvBoundary net_boundary = ConvBoundary::circular;
  OutputHead head = OutputHead::product;

  TrainConfig train;

  std::size_t network_samples = 100000;
  int chains = 32;
  long burn_in = -1;
  long thinning = -1;

  std::vector<std::string> metrics;
  int max_order = 8;
  int local_mle_max_order = 0;

  bool wants(const std::string& metric) const {
    return std::find(metrics.begin(), metrics.end(), metric) != metrics.end();
  }

  /// Lattice for one entry of `sizes` (chains) or the rows x cols grid.
  SpinLattice lattice_for(int size) const {
    return lattice == Geometry::grid ? SpinLattice::grid(rows, cols, boundary) : SpinLattice::chain(size, boundary);
  }
  std::vector<int> system_sizes() const { return lattice == Geometry::grid ? std::vector<int>{rows * cols} : sizes; }

  ArchitectureSpec architecture_for(int n) const {
    const int L = layers > 0 ? layers : static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
    const int K = kernel > 0 ? kernel : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n)))) + 1;
    const int F = features > 0 ? features : n;
    if (kind == ModelKind::arcnn) {
      require(lattice == Geometry::chain, "arcnn models need a chain target");
      return ArchitectureSpec::arcnn(n, L, K, F);
    }
    if (lattice == Geometry::grid) return ArchitectureSpec::cnn2d(rows, cols, L, K, F, net_boundary, head);
    return ArchitectureSpec::cnn1d(n, L, K, F, net_boundary, head);
  }

  void validate() const {
    require(!id.empty(), "experiment.id must not be empty");
    require(id.find_first_of("/\\") == std::string::npos, "experiment.id must not contain path separators");
    require(repetitions >= 1, "experiment.repetitions must be positive");
    require(model == "tfim" || model == "ionchain" || model == "dissipative",
            "target.model must be tfim, ionchain or dissipative");
    if (lattice == Geometry::grid) {
      require(rows >= 1 && cols >= 1, "grid targets need rows and cols");
    } else {
      require(!sizes.empty(), "target.sizes must list at least one chain length");
      for (int n : sizes) require(n >= 1 && n <= kDefaultQubitCap, "chain length outside [1, 20]");
    }
    require(dephasing >= 0.0 && dephasing <= 1.0, "target.dephasing must lie in [0, 1]");
    require(gamma >= 0.0, "target.gamma must be nonnegative");
    if (model == "ionchain") require(alpha > 0.0 && lattice == Geometry::chain, "ionchain needs a chain and alpha > 0");
    if (model == "dissipative") {
      require(solver == "exact" || solver == "mcwf", "target.solver must be exact or mcwf");
      require(trajectories >= 1 && t_final > 0.0 && dt > 0.0, "invalid trajectory settings");
    }
    require(!dataset_sizes.empty(), "dataset.sizes must list at least one size");
    for (auto ns : dataset_sizes) require(ns >= 2, "dataset sizes must be at least 2");
    require(flip_threshold > 0.0 && flip_threshold < 0.25, "povm.flip_threshold must lie in (0, 1/4)");
    require(pilot_samples >= 1, "povm.pilot_samples must be positive");
    require(network_samples >= 2, "sampling.network_samples must be at least 2");
    require(chains >= 1, "sampling.chains must be positive");
    require(max_order >= 1, "metrics.max_order must be positive");
    require(local_mle_max_order >= 0 && local_mle_max_order <= 6, "metrics.local_mle_max_order must lie in [0, 6]");
    for (const auto& m : metrics)
      require(m == "infidelity" || m == "mle" || m == "network" || m == "correlators" || m == "bond_zz" || m == "xi_diag" ||
                  m == "xi_full",
              "unknown metric '" + m + "'");
    if (wants("correlators")) {
      require(lattice == Geometry::chain, "the correlators metric needs a chain target");
      for (int n : sizes) require(max_order <= n, "metrics.max_order exceeds the chain length");
    }
    if (wants("xi_diag") || wants("xi_full")) require(lattice == Geometry::grid, "correlation lengths need a grid");
    switch (pipeline) {
      case Pipeline::fidelity:
        require(model == "tfim", "the fidelity pipeline needs a tfim target");
        for (int n : system_sizes()) require(n <= 8, "the fidelity pipeline enumerates 4^N outcomes; N <= 8");
        break;
      case Pipeline::observables:
        require(model != "dissipative", "dissipative targets use the steady pipeline");
        break;
      case Pipeline::steady:
        require(model == "dissipative" && lattice == Geometry::grid, "the steady pipeline needs a dissipative grid");
        require(!fields.empty(), "target.fields must list the drive strengths");
        break;
    }
    for (int n : system_sizes()) architecture_for(n).validate();
    train.validate(*std::min_element(dataset_sizes.begin(), dataset_sizes.end()));
  }
};

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  const auto e = s.find_last_not_of(" \t\r\n");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& raw) {
  std::vector<std::string> out;
  std::stringstream ss(raw);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

class Reader {
 public:
  explicit Reader(const KeyValues& kv) : kv_(kv) {}

  template <class T>
  void get(const std::string& key, T& out) {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return;
    used_.insert(key);
    out = parse<T>(key, it->second);
  }

  template <class T>
  void get_list(const std::string& key, std::vector<T>& out) {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return;
    used_.insert(key);
    out.clear();
    for (const auto& item : split_list(it->second)) out.push_back(parse<T>(key, item));
  }

  // `auto` maps to 0.
  void get_auto(const std::string& key, int& out) {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return;
    used_.insert(key);
    out = trim(it->second) == "auto" ? 0 : parse<int>(key, it->second);
  }

  template <class E>
  void get_enum(const std::string& key, E& out, const std::map<std::string, E>& names) {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return;
    used_.insert(key);
    const auto v = trim(it->second);
    const auto hit = names.find(v);
    if (hit == names.end()) throw ConfigError("invalid value '" + v + "' for " + key);
    out = hit->second;
  }

  void reject_unknown() const {
    for (const auto& [k, v] : kv_)
      if (!used_.count(k)) throw ConfigError("unknown config key '" + k + "'");
  }

 private:
  template <class T>
  static T parse(const std::string& key, const std::string& raw) {
    const auto v = trim(raw);
    if constexpr (std::is_same_v<T, std::string>) {
      return v;
    } else if constexpr (std::is_same_v<T, bool>) {
      if (v == "true" || v == "yes" || v == "1") return true;
      if (v == "false" || v == "no" || v == "0") return false;
      throw ConfigError("invalid boolean '" + v + "' for " + key);
    } else {
      std::istringstream is(v);
      T out{};
      is >> out;
      if (!is || !is.eof()) {
        // Accept integral values written in scientific notation, such as 1e4.
        if constexpr (std::is_integral_v<T>) {
          std::istringstream d(v);
          double x = 0.0;
          d >> x;
          if (d && d.eof() && x >= 0.0 && x == std::floor(x)) return static_cast<T>(x);
        }
        throw ConfigError("invalid value '" + v + "' for " + key);
      }
      return out;
    }
  }

  const KeyValues& kv_;
  std::set<std::string> used_;
};

}  // namespace detail

inline KeyValues parse_ini(std::istream& in) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax error: ") + e.what());
  }
  KeyValues kv;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("config key '" + section + "' lies outside any section");
    for (const auto& [key, value] : body) kv[section + "." + key] = value.data();
  }
  return kv;
}

inline KeyValues parse_json(std::istream& in) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config syntax error: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("JSON config must be an object of sections");
  auto scalar = [](const nlohmann::json& v) -> std::string {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    if (v.is_number()) {
      std::ostringstream os;
      os.precision(17);
      os << v.get<double>();
      return os.str();
    }
    throw ConfigError("unsupported JSON value " + v.dump());
  };
  KeyValues kv;
  for (const auto& [section, body] : doc.items()) {
    if (!body.is_object()) throw ConfigError("JSON section '" + section + "' must be an object");
    for (const auto& [key, value] : body.items()) {
      std::string raw;
      if (value.is_array()) {
        for (std::size_t i = 0; i < value.size(); ++i) raw += (i ? "," : "") + scalar(value[i]);
      } else {
        raw = scalar(value);
      }
      kv[section + "." + key] = raw;
    }
  }
  return kv;
}

/// Applies key-value overrides on top of `base` (normally a preset or the defaults).
inline ExperimentConfig apply_config(ExperimentConfig c, const KeyValues& kv) {
  detail::Reader r(kv);
  r.get("experiment.id", c.id);
  r.get_enum("experiment.pipeline", c.pipeline,
             {{"fidelity", Pipeline::fidelity}, {"observables", Pipeline::observables}, {"steady", Pipeline::steady}});
  r.get("experiment.repetitions", c.repetitions);
  r.get("experiment.seed", c.seed);

  r.get("target.model", c.model);
  r.get_enum("target.lattice", c.lattice, {{"chain", Geometry::chain}, {"grid", Geometry::grid}});
  r.get_list("target.sizes", c.sizes);
  r.get("target.rows", c.rows);
  r.get("target.cols", c.cols);
  r.get_enum("target.boundary", c.boundary, {{"open", Boundary::open}, {"periodic", Boundary::periodic}});
  r.get("target.J", c.J);
  r.get("target.B", c.B);
  r.get_list("target.fields", c.fields);
  r.get("target.alpha", c.alpha);
  r.get("target.dephasing", c.dephasing);
  r.get("target.gamma", c.gamma);
  r.get("target.solver", c.solver);
  r.get("target.trajectories", c.trajectories);
  r.get("target.t_final", c.t_final);
  r.get("target.dt", c.dt);

  r.get_enum("povm.flip", c.flip, {{"no", FlipMode::no}, {"yes", FlipMode::yes}, {"auto", FlipMode::automatic}});
  r.get("povm.flip_threshold", c.flip_threshold);
  r.get("povm.pilot_samples", c.pilot_samples);

  r.get_list("dataset.sizes", c.dataset_sizes);

  r.get_enum("model.kind", c.kind, {{"cnn", ModelKind::cnn}, {"arcnn", ModelKind::arcnn}});
  r.get_auto("model.layers", c.layers);
  r.get_auto("model.kernel", c.kernel);
  r.get_auto("model.features", c.features);
  r.get_enum("model.boundary", c.net_boundary, {{"circular", ConvBoundary::circular}, {"open", ConvBoundary::open}});
  r.get_enum("model.head", c.head, {{"product", OutputHead::product}, {"dense", OutputHead::dense}});

  r.get("train.epochs", c.train.epochs);
  r.get("train.batch_size", c.train.batch_size);
  r.get("train.lr", c.train.lr);
  r.get("train.patience", c.train.patience);
  r.get("train.validation_fraction", c.train.validation_fraction);
  r.get("train.norm_samples", c.train.n_norm_samples);

  r.get("sampling.network_samples", c.network_samples);
  r.get("sampling.chains", c.chains);
  r.get("sampling.burn_in", c.burn_in);
  r.get("sampling.thinning", c.thinning);

  r.get_list("metrics.list", c.metrics);
  r.get("metrics.max_order", c.max_order);
  r.get("metrics.local_mle_max_order", c.local_mle_max_order);
  r.reject_unknown();
  return c;
}

inline KeyValues read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  const bool json = path.size() >= 5 && path.substr(path.size() - 5) == ".json";
  return json ? parse_json(in) : parse_ini(in);
}

inline const char* pipeline_name(Pipeline p) {
  switch (p) {
    case Pipeline::fidelity: return "fidelity";
    case Pipeline::observables: return "observables";
    case Pipeline::steady: return "steady";
  }
  return "?";
}

inline const char* flip_name(FlipMode f) {
  switch (f) {
    case FlipMode::no: return "no";
    case FlipMode::yes: return "yes";
    case FlipMode::automatic: return "auto";
  }
  return "?";
}

}  // namespace nqst::bench
