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

// nqst: command-line front end for state synthesis, measurement simulation, training,
// sampling, estimation, MLE and full benchmark runs.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure.

#include <CLI11.hpp>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>

#include "nqst/bench/presets.hpp"
#include "nqst/bench/run.hpp"
#include "nqst/models/checkpoint.hpp"

namespace {

using namespace nqst;

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

std::vector<int> parse_sites(const std::string& s) {
  std::vector<int> out;
  for (const auto& item : bench::detail::split_list(s)) {
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw ConfigError("invalid site index '" + item + "'");
    }
  }
  return out;
}

std::pair<int, int> parse_grid(const std::string& s) {
  const auto x = s.find('x');
  if (x == std::string::npos) throw ConfigError("grid must be given as ROWSxCOLS, got '" + s + "'");
  try {
    return {std::stoi(s.substr(0, x)), std::stoi(s.substr(x + 1))};
  } catch (const std::exception&) {
    throw ConfigError("grid must be given as ROWSxCOLS, got '" + s + "'");
  }
}

PovmSpec povm_by_name(const std::string& name) {
  if (name == "pauli4") return pauli4(false);
  if (name == "pauli4-flipped") return pauli4(true);
  throw ConfigError("unknown POVM '" + name + "' (pauli4 | pauli4-flipped)");
}

void print_estimate(const std::string& metric, const Estimate& e, std::size_t n, std::uint64_t seed) {
  const std::string label = metric.find(',') == std::string::npos ? metric : "\"" + metric + "\"";
  std::cout << "metric,value,stderr,n_samples,seed\n"
            << label << "," << bench::detail::fmt(e.value) << "," << bench::detail::fmt(e.std_error) << "," << n
            << "," << seed << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural-network quantum state tomography toolkit"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Synthesize a target state and write a state file");
  bench::ExperimentConfig sc;
  int synth_n = 4;
  std::string synth_lattice = "chain", synth_boundary = "periodic", synth_grid, synth_out;
  synth->add_option("--model", sc.model, "tfim | ionchain | dissipative")->capture_default_str();
  synth->add_option("--lattice", synth_lattice, "chain | grid")->capture_default_str();
  synth->add_option("--n", synth_n, "chain length")->capture_default_str();
  synth->add_option("--grid", synth_grid, "grid shape ROWSxCOLS");
  synth->add_option("--boundary", synth_boundary, "open | periodic")->capture_default_str();
  synth->add_option("--J", sc.J, "coupling J")->capture_default_str();
  synth->add_option("--B", sc.B, "transverse field B")->capture_default_str();
  synth->add_option("--alpha", sc.alpha, "long-range exponent (ionchain)")->capture_default_str();
  synth->add_option("--dephasing", sc.dephasing, "dephasing probability p")->capture_default_str();
  synth->add_option("--gamma", sc.gamma, "decay rate (dissipative)")->capture_default_str();
  synth->add_option("--solver", sc.solver, "exact | mcwf (dissipative)")->capture_default_str();
  synth->add_option("--trajectories", sc.trajectories, "MCWF trajectories")->capture_default_str();
  synth->add_option("--t-final", sc.t_final, "MCWF final time")->capture_default_str();
  synth->add_option("--dt", sc.dt, "MCWF time step")->capture_default_str();
  synth->add_option("--seed", sc.seed, "MCWF seed")->capture_default_str();
  synth->add_option("-o,--out", synth_out, "output state file")->required();

  // sample-target
  auto* st = app.add_subcommand("sample-target", "Simulate POVM measurements of a state file");
  std::string st_state, st_povm = "pauli4", st_out;
  std::size_t st_n = 1000;
  std::uint64_t st_seed = 1;
  st->add_option("--state", st_state, "state file")->required();
  st->add_option("--povm", st_povm, "pauli4 | pauli4-flipped")->capture_default_str();
  st->add_option("-n,--n-samples", st_n, "number of outcome strings")->capture_default_str();
  st->add_option("--seed", st_seed, "sampling seed")->capture_default_str();
  st->add_option("-o,--out,--dataset", st_out, "output dataset file")->required();

  // train
  auto* tr = app.add_subcommand("train", "Train a cnn or arcnn on a dataset");
  std::string tr_report, tr_data, tr_out, tr_arch = "arcnn", tr_boundary = "circular", tr_head = "product", tr_grid, tr_log;
  int tr_layers = 0, tr_kernel = 0, tr_features = 0;
  TrainConfig tc;
  tr->add_option("--dataset,--data", tr_data, "dataset file")->required();
  tr->add_option("--arch", tr_arch, "cnn | arcnn")->capture_default_str();
  tr->add_option("--layers", tr_layers, "L (0 = round(sqrt N))")->capture_default_str();
  tr->add_option("--kernel", tr_kernel, "K (0 = ceil(sqrt N) + 1)")->capture_default_str();
  tr->add_option("--features", tr_features, "F (0 = N)")->capture_default_str();
  tr->add_option("--boundary", tr_boundary, "cnn boundary: circular | open")->capture_default_str();
  tr->add_option("--head", tr_head, "cnn head: product | dense")->capture_default_str();
  tr->add_option("--grid", tr_grid, "2D cnn over ROWSxCOLS sites");
  tr->add_option("--epochs", tc.epochs, "maximum epochs")->capture_default_str();
  tr->add_option("--batch,--batch-size", tc.batch_size, "mini-batch size")->capture_default_str();
  tr->add_option("--lr", tc.lr, "Adam learning rate")->capture_default_str();
  tr->add_option("--patience", tc.patience, "early-stopping patience in epochs")->capture_default_str();
  tr->add_option("--norm-samples", tc.n_norm_samples, "cnn normalization samples per batch (0 = batch size)");
  tr->add_option("--seed", tc.seed, "initialization and shuffling seed")->capture_default_str();
  tr->add_option("--log", tr_log, "write per-epoch CSV here");
  tr->add_option("--checkpoint,-o,--out", tr_out, "output checkpoint")->required();
  tr->add_option("--report", tr_report, "write the TrainReport JSON here instead of stdout");

  // sample
  auto* sa = app.add_subcommand("sample", "Draw samples from a trained model");
  std::string sa_model, sa_out, sa_povm = "pauli4";
  std::size_t sa_n = 10000;
  bench::ExperimentConfig mc;
  long sa_burn = -1, sa_thin = -1;
  int sa_chains = 32;
  std::uint64_t sa_seed = 1;
  sa->add_option("--checkpoint,--model", sa_model, "checkpoint")->required();
  sa->add_option("-n,--n-samples", sa_n, "number of samples")->capture_default_str();
  sa->add_option("--seed", sa_seed, "sampling seed")->capture_default_str();
  sa->add_option("--povm", sa_povm, "POVM label stored in the dataset")->capture_default_str();
  sa->add_option("--chains", sa_chains, "cnn: Metropolis chains")->capture_default_str();
  sa->add_option("--mcmc-burnin,--burn-in", sa_burn, "cnn: burn-in steps (negative = 40 N)");
  sa->add_option("--mcmc-thin,--thinning", sa_thin, "cnn: steps between samples (negative = N)");
  sa->add_option("-o,--out", sa_out, "output dataset file")->required();

  // estimate
  auto* es = app.add_subcommand("estimate", "Estimate an observable from a dataset or a model");
  std::string es_data, es_ckpt, es_obs, es_truth, es_out, es_grid;
  std::size_t es_n = 100000;
  std::uint64_t es_seed = 1;
  auto* es_data_opt = es->add_option("--dataset,--data", es_data, "dataset file");
  es->add_option("--checkpoint", es_ckpt, "trained model (sampled with --n-samples)")->excludes(es_data_opt);
  es->add_option("--observable", es_obs,
                 "sz | szsz | cn:ORDER | xi2:diag | xi2:full | infidelity | z:SITES (z string, e.g. z:0,1)")
      ->required();
  es->add_option("--truth", es_truth, "state file for the exact value (required by infidelity)");
  es->add_option("--grid", es_grid, "lattice shape ROWSxCOLS for xi2 (default: square)");
  es->add_option("-n,--n-samples", es_n, "model samples when estimating from a checkpoint")->capture_default_str();
  es->add_option("--seed", es_seed, "model sampling seed")->capture_default_str();
  es->add_option("--out", es_out, "write the result as CSV (or JSON for *.json)");

  // mle
  auto* ml = app.add_subcommand("mle", "Maximum-likelihood density matrix (global or local)");
  std::string ml_data, ml_support, ml_out, ml_truth;
  MleConfig mcfg;
  ml->add_option("--dataset,--data", ml_data, "dataset file")->required();
  ml->add_option("--support", ml_support, "sites for local MLE, e.g. 0,1,2, or full");
  ml->add_option("--max-iter,--max-iterations", mcfg.max_iterations)->capture_default_str();
  ml->add_option("--tol,--tolerance", mcfg.tolerance)->capture_default_str();
  ml->add_option("--truth", ml_truth, "state file: report the classical infidelity to it");
  ml->add_option("-o,--out", ml_out, "output state file");

  // run
  auto* ru = app.add_subcommand("run", "Run a full benchmark experiment");
  std::string ru_config, ru_preset, ru_out;
  std::vector<std::string> ru_set;
  bool ru_dry = false;
  auto* cfg_opt = ru->add_option("--config", ru_config, "INI or JSON experiment file");
  ru->add_option("--preset", ru_preset, "start from a named preset")->excludes(cfg_opt);
  ru->add_option("--set", ru_set, "override section.key=value (repeatable)");
  ru->add_option("-o,--out", ru_out, "output directory (default runs/<id>)");
  ru->add_flag("--dry-run", ru_dry, "validate and print the stage plan only");

  // presets
  auto* pr = app.add_subcommand("presets", "Built-in experiment presets");
  pr->require_subcommand(1);
  auto* pr_list = pr->add_subcommand("list", "List presets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*synth) {
      sc.lattice = synth_lattice == "grid" ? Geometry::grid : Geometry::chain;
      if (synth_lattice != "grid" && synth_lattice != "chain") throw ConfigError("--lattice must be chain or grid");
      if (synth_boundary != "open" && synth_boundary != "periodic") throw ConfigError("--boundary must be open or periodic");
      sc.boundary = synth_boundary == "open" ? Boundary::open : Boundary::periodic;
      if (sc.lattice == Geometry::grid) {
        std::tie(sc.rows, sc.cols) = parse_grid(synth_grid);
      } else {
        sc.sizes = {synth_n};
      }
      if (sc.model == "dissipative") {
        sc.pipeline = bench::Pipeline::steady;
        sc.fields = {sc.B};
      }
      sc.validate();
      const auto lat = sc.lattice_for(synth_n);
      const Target t = bench::synthesize_target(sc, lat, sc.B);
      save_state(synth_out, t);
      std::cout << "wrote " << synth_out << " (" << bench::target_key(sc, lat, sc.B) << ", " << n_qubits(t)
                << " qubits)\n";
    } else if (*st) {
      const Target t = load_state(st_state);
      const auto ds = sample_outcomes(t, povm_by_name(st_povm), st_n, st_seed);
      write_dataset(st_out, ds);
      std::cout << "wrote " << st_out << " (" << ds.size() << " samples, " << ds.povm_id() << ")\n";
    } else if (*tr) {
      const auto ds = read_dataset(tr_data);
      bench::ExperimentConfig ac;
      ac.kind = tr_arch == "cnn" ? ModelKind::cnn : ModelKind::arcnn;
      if (tr_arch != "cnn" && tr_arch != "arcnn") throw ConfigError("--arch must be cnn or arcnn");
      ac.layers = tr_layers;
      ac.kernel = tr_kernel;
      ac.features = tr_features;
      if (tr_boundary != "circular" && tr_boundary != "open") throw ConfigError("--boundary must be circular or open");
      if (tr_head != "product" && tr_head != "dense") throw ConfigError("--head must be product or dense");
      ac.net_boundary = tr_boundary == "open" ? ConvBoundary::open : ConvBoundary::circular;
      ac.head = tr_head == "dense" ? OutputHead::dense : OutputHead::product;
      if (!tr_grid.empty()) {
        ac.lattice = Geometry::grid;
        std::tie(ac.rows, ac.cols) = parse_grid(tr_grid);
      }
      const auto spec = ac.architecture_for(ds.n_qubits);
      tc.validate(ds.size());
      const auto res = train(spec, init_params(spec, tc.seed), ds, tc);
      save_checkpoint(tr_out, spec, res.params);
      if (!tr_log.empty()) {
        std::ofstream log(tr_log);
        log << "epoch,train_nll,validation_nll,log_normalization\n";
        for (const auto& e : res.report.epochs)
          log << e.epoch << "," << bench::detail::fmt(e.train_nll) << "," << bench::detail::fmt(e.validation_nll)
              << "," << bench::detail::fmt(e.log_normalization) << "\n";
      }
      nlohmann::json report = {{"architecture", spec.describe()},
                               {"parameters", parameter_count(spec)},
                               {"checkpoint", tr_out},
                               {"best_epoch", res.report.best_epoch},
                               {"best_validation_nll", res.report.best_validation_nll},
                               {"early_stopped", res.report.early_stopped},
                               {"n_train", res.report.n_train},
                               {"n_validation", res.report.n_validation},
                               {"epochs", nlohmann::json::array()}};
      for (const auto& e : res.report.epochs)
        report["epochs"].push_back({{"epoch", e.epoch}, {"train_nll", e.train_nll}, {"validation_nll", e.validation_nll},
                                    {"log_normalization", e.log_normalization}, {"wall_seconds", e.wall_seconds}});
      if (tr_report.empty()) {
        std::cout << report.dump(2) << "\n";
      } else {
        std::ofstream(tr_report) << report.dump(2) << "\n";
        std::cerr << "wrote " << tr_out << " and " << tr_report << "\n";
      }
    } else if (*sa) {
      const auto ck = load_checkpoint(sa_model);
      const auto code = povm_by_name(sa_povm).code();
      OutcomeDataset ds;
      if (ck.spec.kind == ModelKind::arcnn) {
        ds = sample_arcnn(ck.params, ck.spec, sa_n, sa_seed, nullptr, code);
      } else {
        ChainConfig cc;
        cc.n_chains = sa_chains;
        cc.burn_in = sa_burn;
        cc.thinning = sa_thin;
        cc.seed = sa_seed;
        McmcReport rep;
        ds = sample_cnn_mcmc(ck.params, ck.spec, sa_n, cc, &rep, code);
        std::cout << "Metropolis acceptance " << bench::detail::fmt(rep.acceptance_rate) << "\n";
      }
      write_dataset(sa_out, ds);
      std::cout << "wrote " << sa_out << " (" << ds.size() << " samples)\n";
    } else if (*es) {
      if (es_data.empty() == es_ckpt.empty()) throw ConfigError("estimate needs exactly one of --dataset or --checkpoint");
      std::optional<Checkpoint> ck;
      OutcomeDataset ds;
      if (!es_ckpt.empty()) {
        ck = load_checkpoint(es_ckpt);
        if (ck->spec.kind == ModelKind::arcnn) {
          ds = sample_arcnn(ck->params, ck->spec, es_n, es_seed);
        } else {
          ChainConfig cc;
          cc.seed = es_seed;
          ds = sample_cnn_mcmc(ck->params, ck->spec, es_n, cc);
        }
      } else {
        ds = read_dataset(es_data);
      }
      const auto povm = povm_from_code(ds.povm_code);
      const int n = ds.n_qubits;
      std::optional<Target> truth;
      if (!es_truth.empty()) {
        truth = load_state(es_truth);
        if (n_qubits(*truth) != n) throw ConfigError("--truth has a different number of qubits");
      }
      const auto colon = es_obs.find(':');
      const std::string kind = es_obs.substr(0, colon), arg = colon == std::string::npos ? "" : es_obs.substr(colon + 1);
      Estimate e;
      double exact = std::nan("");
      std::vector<int> chain_sites(static_cast<std::size_t>(n));
      std::iota(chain_sites.begin(), chain_sites.end(), 0);
      if (kind == "sz" || kind == "szsz" || kind == "cn") {
        const int order = kind == "sz" ? 1 : kind == "szsz" ? 2 : parse_sites(arg).at(0);
        e = correlator_powers(ds, order, povm);
        if (truth) exact = exact_correlator_power(*truth, order);
      } else if (kind == "z") {
        const auto sites = parse_sites(arg);
        e = estimate_observable(ds, LocalObservable::z_string(sites), povm);
        if (truth) exact = z_string_expectation(*truth, sites);
      } else if (kind == "xi2") {
        if (arg != "diag" && arg != "full") throw ConfigError("xi2 needs :diag or :full");
        int r = 0, c = 0;
        if (!es_grid.empty()) {
          std::tie(r, c) = parse_grid(es_grid);
        } else {
          r = c = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
        }
        if (r * c != n) throw ConfigError("lattice shape does not match the dataset; pass --grid ROWSxCOLS");
        const auto lat = SpinLattice::grid(r, c);
        const auto subset = arg == "diag" ? SiteSubset::main_diagonal : SiteSubset::full_lattice;
        e = correlation_length_sq(ds, lat, subset, povm);
        if (truth) exact = exact_correlation_length_sq(*truth, lat, subset);
      } else if (kind == "infidelity") {
        if (!truth) throw ConfigError("infidelity needs --truth");
        const auto P = exact_distribution(*truth, povm);
        e.value = ck ? classical_infidelity(model_distribution(ck->params, ck->spec), P)
                     : classical_infidelity(empirical_distribution(ds), P);
      } else {
        throw ConfigError("unknown observable '" + es_obs + "'");
      }
      const std::uint64_t seed = ck ? es_seed : ds.seed;
      print_estimate(es_obs, e, ds.size(), seed);
      if (truth && kind != "infidelity") std::cout << "exact," << bench::detail::fmt(exact) << "\n";
      if (!es_out.empty()) {
        std::ofstream out(es_out);
        if (es_out.size() > 5 && es_out.substr(es_out.size() - 5) == ".json") {
          nlohmann::json j = {{"metric", es_obs}, {"value", e.value}, {"stderr", e.std_error},
                              {"n_samples", ds.size()}, {"seed", seed}};
          if (truth && kind != "infidelity") j["exact"] = exact;
          out << j.dump(2) << "\n";
        } else {
          out << "metric,value,stderr,n_samples,seed\n\"" << es_obs << "\"," << bench::detail::fmt(e.value) << ","
              << bench::detail::fmt(e.std_error) << "," << ds.size() << "," << seed << "\n";
        }
        if (!out) throw ConfigError("cannot write " + es_out);
      }
    } else if (*ml) {
      const auto ds = read_dataset(ml_data);
      const auto povm = povm_from_code(ds.povm_code);
      const auto res = ml_support.empty() || ml_support == "full" ? mle_reconstruct(ds, povm, mcfg)
                                          : local_mle(ds, parse_sites(ml_support), povm, mcfg);
      std::cout << "iterations " << res.iterations << (res.converged ? " (converged)" : " (not converged)")
                << "\nlog-likelihood " << bench::detail::fmt(res.log_likelihood.empty() ? 0.0 : res.log_likelihood.back())
                << "\n";
      if (!ml_truth.empty()) {
        if (!ml_support.empty() && ml_support != "full") throw ConfigError("--truth compares full reconstructions only");
        const Target t = load_state(ml_truth);
        std::cout << "classical infidelity "
                  << bench::detail::fmt(classical_infidelity(exact_distribution(res.rho, povm), exact_distribution(t, povm)))
                  << "\n";
      }
      if (!ml_out.empty()) {
        save_state(ml_out, res.rho);
        std::cout << "wrote " << ml_out << "\n";
      }
    } else if (*ru) {
      bench::KeyValues over;
      for (const auto& s : ru_set) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects section.key=value, got '" + s + "'");
        over[s.substr(0, eq)] = s.substr(eq + 1);
      }
      bench::ExperimentConfig cfg;
      if (!ru_config.empty()) {
        cfg = bench::load_config(ru_config);
      } else if (!ru_preset.empty()) {
        cfg = bench::preset(ru_preset);
      } else {
        throw ConfigError("run needs --config or --preset");
      }
      cfg = bench::apply_config(cfg, over);
      bench::RunOptions opt;
      opt.output_dir = ru_out;
      opt.dry_run = ru_dry;
      opt.cache_dir = bench::cache_dir_from_env();
      opt.log = [](const std::string& s) { std::cerr << s << "\n"; };
      const auto summary = bench::run_experiment(cfg, opt);
      if (ru_dry) {
        std::cout << "config valid: " << cfg.id << " (" << bench::pipeline_name(cfg.pipeline) << ")\n";
        for (const auto& line : summary.plan) std::cout << line << "\n";
      } else {
        for (const auto& t : summary.tables) {
          std::cout << "== " << t.name << "\n";
          for (std::size_t i = 0; i < t.columns.size(); ++i) std::cout << (i ? "," : "") << t.columns[i];
          std::cout << "\n";
          for (const auto& row : t.rows) {
            for (std::size_t i = 0; i < row.size(); ++i) std::cout << (i ? "," : "") << bench::detail::cell_text(row[i]);
            std::cout << "\n";
          }
        }
        std::cout << "results in " << summary.output_dir << "\n";
      }
    } else if (*pr_list) {
      for (const auto& p : bench::presets()) std::cout << p.name << "\t" << p.summary << "\n";
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
