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

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "nqst/bench/presets.hpp"
#include "nqst/bench/run.hpp"

using namespace nqst;
using namespace nqst::bench;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("nqst_bench_test_" + name);
  fs::remove_all(p);
  return p;
}

ExperimentConfig tiny_fidelity() {
  ExperimentConfig c;
  c.id = "tiny";
  c.pipeline = Pipeline::fidelity;
  c.sizes = {3};
  c.dataset_sizes = {200};
  c.repetitions = 2;
  c.train.epochs = 3;
  c.train.batch_size = 50;
  c.metrics = {"infidelity", "mle"};
  return c;
}

}  // namespace

TEST_CASE("flip decision", "[bench]") {
  const auto povm = pauli4();
  SECTION("near-dark steady state recommends the flipped POVM") {
    const LindbladSpec spec{SpinLattice::grid(2, 2), IsingCoupling::nearest_neighbor(-1.25, -0.002), 1.0};
    const auto pilot = sample_outcomes(exact_steady_state(spec), povm, 10000, 1);
    const auto d = single_site_diagnostics(single_site_frequencies(pilot));
    CHECK(d.outcome == 2);
    CHECK(flip_decision(pilot));
  }
  SECTION("maximally mixed state needs no flip") {
    const auto pilot = sample_outcomes(DensityMatrix::maximally_mixed(3), povm, 10000, 2);
    CHECK_FALSE(flip_decision(pilot));
  }
  SECTION("exact marginals and determinism") {
    std::vector<std::array<double, 4>> m = {{0.3, 0.3, 0.3, 0.1}, {0.3, 0.3, 5e-5, 0.39995}};
    CHECK(flip_decision(m));
    CHECK_FALSE(flip_decision(m, 1e-5));
    const auto pilot = sample_outcomes(DensityMatrix::maximally_mixed(2), povm, 500, 3);
    CHECK(flip_decision(pilot, 0.2) == flip_decision(pilot, 0.2));
  }
}

TEST_CASE("config files", "[bench][config]") {
  const std::string ini =
      "[experiment]\npreset = ising1d\nid = custom\nrepetitions = 3\n"
      "[target]\nsizes = 4, 5\nB = 0.5\n[dataset]\nsizes = 1e3,2000\n[model]\nlayers = auto\nkernel = 2\n"
      "[train]\nlr = 0.004\n";
  const std::string json = R"({"experiment": {"preset": "ising1d", "id": "custom", "repetitions": 3},
    "target": {"sizes": [4, 5], "B": 0.5}, "dataset": {"sizes": [1000, 2000]},
    "model": {"layers": "auto", "kernel": 2}, "train": {"lr": 0.004}})";
  const auto dir = scratch("config");
  fs::create_directories(dir);
  std::ofstream(dir / "c.ini") << ini;
  std::ofstream(dir / "c.json") << json;
  const auto a = load_config((dir / "c.ini").string());
  const auto b = load_config((dir / "c.json").string());
  CHECK(config_json(a) == config_json(b));
  CHECK(a.id == "custom");
  CHECK(a.sizes == std::vector<int>{4, 5});
  CHECK(a.dataset_sizes == std::vector<std::size_t>{1000, 2000});
  CHECK(a.layers == 0);
  CHECK(a.kernel == 2);
  CHECK(a.train.lr == 0.004);
  CHECK(a.B == 0.5);
  CHECK(a.J == preset("ising1d").J);
  CHECK(a.architecture_for(4).layers == 2);

  CHECK_THROWS_AS(apply_config({}, {{"target.colour", "red"}}), ConfigError);
  CHECK_THROWS_AS(apply_config({}, {{"model.kind", "rnn"}}), ConfigError);
  CHECK_THROWS_AS(apply_config({}, {{"experiment.repetitions", "many"}}), ConfigError);
  std::istringstream orphan("x = 1\n");
  CHECK_THROWS_AS(parse_ini(orphan), ConfigError);
  auto bad = tiny_fidelity();
  bad.sizes = {9};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK_THROWS_AS(preset("nonexistent"), ConfigError);
  for (const auto& p : presets()) CHECK_NOTHROW(p.config.validate());
}

TEST_CASE("architecture rule of the chain presets", "[bench][architecture]") {
  const auto c = preset("ising1d");
  CHECK(parameter_count(c.architecture_for(4)) == 109);
  CHECK(parameter_count(c.architecture_for(6)) == 259);
  CHECK(parameter_count(preset("ionchain").architecture_for(16)) == 3572);
  CHECK(parameter_count(preset("ising2d").architecture_for(16)) == 1329);
  CHECK(parameter_count(preset("steady").architecture_for(16)) == 3169);
}

TEST_CASE("dry run validates and plans without side effects", "[bench]") {
  const auto dir = scratch("dry");
  RunOptions o;
  o.output_dir = dir.string();
  o.dry_run = true;
  const auto s = run_experiment(preset("ionchain"), o);
  CHECK(s.plan.size() >= 3);
  CHECK(s.metrics.empty());
  CHECK_FALSE(fs::exists(dir));
  auto bad = preset("ionchain");
  bad.max_order = 17;
  CHECK_THROWS_AS(run_experiment(bad, o), ConfigError);
}

TEST_CASE("pipeline runs are byte-for-byte reproducible", "[bench][determinism]") {
  const auto a = scratch("det_a"), b = scratch("det_b"), cache = scratch("det_cache");
  RunOptions oa, ob;
  oa.output_dir = a.string();
  ob.output_dir = b.string();
  ob.cache_dir = cache.string();
  const auto sa = run_experiment(tiny_fidelity(), oa);
  run_experiment(tiny_fidelity(), ob);  // cold cache
  const auto third = scratch("det_c");
  RunOptions oc = ob;
  oc.output_dir = third.string();
  run_experiment(tiny_fidelity(), oc);  // warm cache
  for (const char* f : {"metrics.csv", "infidelity.csv", "manifest.json"}) {
    INFO(f);
    CHECK(slurp(a / f) == slurp(b / f));
    CHECK(slurp(a / f) == slurp(third / f));
  }
  CHECK(fs::exists(a / "targets"));
  CHECK_FALSE(fs::exists(b / "targets"));
  CHECK_FALSE(fs::exists(a / ".lock"));
  CHECK(slurp(a / "metrics.csv").rfind("metric,value,stderr,n_samples,seed\n", 0) == 0);
  const auto& t = sa.table("infidelity");
  REQUIRE(t.rows.size() == 1);
  CHECK(t.number(0, "N") == 3.0);
  CHECK(t.number(0, "D_NN") > 0.0);
  CHECK(t.number(0, "D_MLE") > 0.0);
  // two repetitions x (D_NN, D_MLE, ratio)
  CHECK(sa.metrics.size() == 6);
}

TEST_CASE("an owned output directory is refused", "[bench]") {
  const auto dir = scratch("lock");
  fs::create_directories(dir);
  std::ofstream(dir / ".lock") << "";
  RunOptions o;
  o.output_dir = dir.string();
  CHECK_THROWS_AS(run_experiment(tiny_fidelity(), o), ConfigError);
  CHECK(fs::exists(dir / ".lock"));
}

TEST_CASE("stage failures name the stage and keep partial artifacts", "[bench][errors]") {
  auto c = preset("steady-small");
  c.rows = 3;
  c.cols = 3;  // beyond the exact steady-state cap
  c.features = 9;
  c.id = "too-big";
  const auto dir = scratch("fail");
  RunOptions o;
  o.output_dir = dir.string();
  try {
    run_experiment(c, o);
    FAIL("expected a failure");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("stage 'synthesize'") != std::string::npos);
  }
  CHECK(fs::exists(dir / "metrics.csv"));
  CHECK(slurp(dir / "manifest.json").find("failed") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / ".lock"));
}

TEST_CASE("observables and steady pipelines at toy scale", "[bench]") {
  SECTION("chain correlators with an arcnn") {
    ExperimentConfig c;
    c.id = "obs";
    c.pipeline = Pipeline::observables;
    c.sizes = {4};
    c.boundary = Boundary::open;
    c.dephasing = 0.1;
    c.dataset_sizes = {500};
    c.repetitions = 2;
    c.kind = ModelKind::arcnn;
    c.layers = 2;
    c.kernel = 2;
    c.features = 3;
    c.train.epochs = 2;
    c.train.batch_size = 50;
    c.network_samples = 1000;
    c.max_order = 3;
    c.local_mle_max_order = 2;
    c.metrics = {"network", "correlators", "bond_zz"};
    RunOptions o;
    o.output_dir = scratch("obs").string();
    const auto s = run_experiment(c, o);
    const auto& t = s.table("observables");
    REQUIRE(t.rows.size() == 4);
    const auto psi = ground_state(build_ising_hamiltonian(SpinLattice::chain(4), IsingCoupling::nearest_neighbor(1, 1)));
    const Target exact = DephasedState{psi.state, 0.1};
    CHECK(t.text(1, "observable") == "C2");
    CHECK(std::abs(t.number(1, "truth") - exact_correlator_power(exact, 2)) < 1e-6);
    CHECK(std::isfinite(t.number(1, "rms_ratio")));
    CHECK(std::isfinite(t.number(1, "local_mle_network")));
    CHECK(std::isnan(t.number(2, "local_mle_data")));
  }
  SECTION("steady state with automatic flip") {
    auto c = preset("steady-small");
    c.rows = 2;
    c.cols = 2;
    c.features = 4;
    c.fields = {-0.002, -3.0};
    c.repetitions = 2;
    c.metrics = {"xi_diag", "xi_full"};
    RunOptions o;
    o.output_dir = scratch("steady").string();
    const auto s = run_experiment(c, o);
    const auto& t = s.table("steady");
    REQUIRE(t.rows.size() == 4);
    CHECK(t.number(0, "flipped") == 1.0);
    CHECK(t.number(2, "flipped") == 0.0);
    CHECK(t.number(0, "weight_sum") == 2.0);
    CHECK(t.number(1, "weight_sum") == 8.0);
  }
}

TEST_CASE("shipped config files reproduce the presets", "[bench][config]") {
  for (const auto& p : presets()) {
    const fs::path file = fs::path(NQST_SOURCE_DIR) / "configs" / (p.name + ".ini");
    INFO(file.string());
    REQUIRE(fs::exists(file));
    CHECK(config_json(load_config(file.string())).dump() == config_json(p.config).dump());
  }
}
