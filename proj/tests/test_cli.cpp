#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>

#include "uqsim/csv.hpp"
#include "uqsim/digest.hpp"
#include "uqsim/errors.hpp"
#include "uqsim/experiment.hpp"
#include "uqsim/reference.hpp"

using namespace uqsim;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Small but complete experiment: two cheap methods plus a tiny reference.
ExperimentConfig smoke_config(const std::string& out_dir) {
  ExperimentConfig cfg = parse_config_text(R"({
    "methods": ["deep_ensemble", "der", "reference"],
    "sample_sizes": [40],
    "batch_sizes": [32],
    "run_seeds": [7, 42],
    "n_d": 2,
    "n_gamma": 2,
    "test_grid": {"count": 25, "lo": 0.05, "hi": 0.95},
    "deep_ensemble": {"members": 2, "epochs": [30]},
    "bootstrap_ensemble": {"epochs": [30]},
    "laplace": {"epochs": [30], "batch_sizes": [32]},
    "hmc": {"pretrain_epochs": [30], "batch_sizes": [32]},
    "der": {"epochs": 40},
    "reference": {"epochs": 30}
  })");
  cfg.output_dir = out_dir;
  cfg.parallelism = 2;
  return cfg;
}

}  // namespace

TEST_CASE("empty config text yields the default experiment") {
  const ExperimentConfig cfg = parse_config_text("");
  CHECK(cfg.sample_sizes == std::vector<int>{50, 100, 500});
  CHECK(cfg.batch_sizes == std::vector<int>{32, 32, 64});
  CHECK(cfg.run_seeds.size() == 5);
  CHECK(cfg.dataset_seeds.size() == 20);
  CHECK(cfg.n_d == 20);
  CHECK(cfg.n_gamma == 10);
  CHECK(cfg.methods.size() == 9);
  CHECK(cfg.deep_ensemble.epochs == std::vector<int>{50, 250, 500});
  CHECK(cfg.laplace.batch_sizes == std::vector<int>{32, 32, 128});
  CHECK(cfg.hmc.step == doctest::Approx(0.00015));
  CHECK(cfg.der.lambda == doctest::Approx(0.01));
  CHECK(cfg.test_grid.count == 500);
}

TEST_CASE("unknown keys are hard errors naming the key") {
  try {
    (void)parse_config_text(R"({"lerning_rate": 0.1})");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("lerning_rate") != std::string::npos);
  }
  try {
    (void)parse_config_text(R"({"vi": {"epocs": 3}})");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("vi.epocs") != std::string::npos);
  }
}

TEST_CASE("parallel-list invariants are enforced") {
  CHECK_THROWS_AS((void)parse_config_text(R"({"sample_sizes": [50]})"), ConfigError);
  CHECK_THROWS_AS((void)parse_config_text(R"({"run_seeds": [7, 7]})"), ConfigError);
  CHECK_THROWS_AS((void)parse_config_text(R"({"methods": ["nope"]})"), ConfigError);
  CHECK_THROWS_AS((void)parse_config_text(R"({"test_grid": {"lo": 0.9, "hi": 0.1}})"),
                  ConfigError);
  // Consistent override of both parallel lists passes.
  const ExperimentConfig ok = parse_config_text(
      R"({"sample_sizes": [50], "batch_sizes": [32],
          "deep_ensemble": {"epochs": [50]}, "bootstrap_ensemble": {"epochs": [50]},
          "laplace": {"epochs": [200], "batch_sizes": [32]},
          "hmc": {"pretrain_epochs": [1000], "batch_sizes": [32]}})");
  CHECK(ok.sample_sizes.size() == 1);
}

TEST_CASE("malformed config text is a config error") {
  CHECK_THROWS_AS((void)parse_config_text("{nope"), ConfigError);
}

TEST_CASE("config snapshot parses back to itself") {
  const ExperimentConfig cfg = parse_config_text("");
  const std::string snapshot = cfg.to_json();
  const ExperimentConfig back = parse_config_text(snapshot);
  CHECK(back.to_json() == snapshot);
}

TEST_CASE("estimate_reference fills grids and identities hold") {
  ReferenceConfig rcfg;
  rcfg.n_d = 3;
  rcfg.n_gamma = 2;
  rcfg.dataset_seeds = {7, 42, 2024};
  rcfg.proc_master_seed = 5;
  rcfg.mlp.hidden_layers = 2;
  rcfg.mlp.hidden_width = 12;
  rcfg.train.epochs = 25;
  rcfg.train.batch_size = 32;
  rcfg.parallelism = 2;

  const std::vector<double> grid = {0.2, 0.5, 0.8};
  const ReferenceResult res = estimate_reference(DgpSpec{}, 40, rcfg, grid);
  REQUIRE(res.grids.size() == 3);
  CHECK(res.failed_cells.empty());
  for (std::size_t i = 0; i < res.grids.size(); ++i) {
    CHECK(res.grids[i].n_d == 3);
    CHECK(res.grids[i].n_gamma == 2);
    const EpistemicBreakdown& b = res.breakdowns[i];
    CHECK(std::fabs(b.procedural + b.data - b.total) <= 1e-9 * std::max(1.0, b.total));
    CHECK(res.estimates[i].epistemic == doctest::Approx(b.total).epsilon(1e-9));
  }
}

TEST_CASE("reference parallel and serial execution agree exactly") {
  ReferenceConfig rcfg;
  rcfg.n_d = 2;
  rcfg.n_gamma = 2;
  rcfg.dataset_seeds = {7, 42};
  rcfg.proc_master_seed = 9;
  rcfg.mlp.hidden_layers = 2;
  rcfg.mlp.hidden_width = 8;
  rcfg.train.epochs = 15;
  rcfg.train.batch_size = 32;

  const std::vector<double> grid = {0.3, 0.7};
  rcfg.parallelism = 1;
  const ReferenceResult serial = estimate_reference(DgpSpec{}, 30, rcfg, grid);
  rcfg.parallelism = 4;
  const ReferenceResult parallel = estimate_reference(DgpSpec{}, 30, rcfg, grid);
  for (std::size_t i = 0; i < serial.grids.size(); ++i)
    for (std::size_t j = 0; j < serial.grids[i].predictions.size(); ++j) {
      CHECK(serial.grids[i].predictions[j].mean == parallel.grids[i].predictions[j].mean);
      CHECK(serial.grids[i].predictions[j].variance ==
            parallel.grids[i].predictions[j].variance);
    }
}

TEST_CASE("grid CSV round-trip preserves every cell") {
  ReferenceGrid g;
  g.query_x = 0.4;
  g.n_d = 2;
  g.n_gamma = 3;
  RandomStream rng(3);
  for (int i = 0; i < 6; ++i) g.predictions.push_back({rng.normal(), 0.1 + rng.uniform01()});
  const std::string path = (fs::temp_directory_path() / "uqsim_grid_roundtrip.csv").string();
  write_reference_grid_csv(path, {g});
  const auto back = read_reference_grid_csv(path);
  REQUIRE(back.size() == 1);
  CHECK(back[0].query_x == g.query_x);
  for (std::size_t i = 0; i < g.predictions.size(); ++i) {
    CHECK(back[0].predictions[i].mean == g.predictions[i].mean);
    CHECK(back[0].predictions[i].variance == g.predictions[i].variance);
  }
  fs::remove(path);
}

TEST_CASE("smoke experiment produces a complete, verifiable artifact") {
  const fs::path dir = fresh_dir("uqsim_smoke_artifact");
  const ExperimentConfig cfg = smoke_config(dir.string());
  const RunArtifact artifact = run_experiment(cfg);
  CHECK(artifact.ok());

  // One table row per (method, N); figure per method; reference files per run.
  CHECK(fs::exists(dir / "table1.csv"));
  CHECK(fs::exists(dir / "regions.csv"));
  CHECK(fs::exists(dir / "figure_deep_ensemble_40.csv"));
  CHECK(fs::exists(dir / "figure_der_40.csv"));
  CHECK(fs::exists(dir / "figure_reference_40.csv"));
  CHECK(fs::exists(dir / "reference_N40_run7_grid.csv"));
  CHECK(fs::exists(dir / "reference_N40_run42_report.csv"));
  CHECK(fs::exists(dir / "manifest.json"));

  const CsvTable table = read_csv((dir / "table1.csv").string());
  CHECK(table.rows.size() == 3);

  const VerifyReport verify = verify_artifact(dir.string());
  for (const std::string& line : verify.lines) CAPTURE(line);
  CHECK(verify.ok);

  fs::remove_all(dir);
}

TEST_CASE("identical configs give byte-identical CSV artifacts") {
  const fs::path a = fresh_dir("uqsim_det_a");
  const fs::path b = fresh_dir("uqsim_det_b");
  ExperimentConfig cfg_a = smoke_config(a.string());
  ExperimentConfig cfg_b = smoke_config(b.string());
  cfg_b.parallelism = 1;  // serial vs parallel must also agree
  (void)run_experiment(cfg_a);
  (void)run_experiment(cfg_b);
  int csv_count = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    if (entry.path().extension() != ".csv") continue;
    ++csv_count;
    const std::string name = entry.path().filename().string();
    CHECK(sha256_file_hex((a / name).string()) == sha256_file_hex((b / name).string()));
  }
  CHECK(csv_count > 5);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("a failed task is recorded without corrupting the others") {
  const fs::path dir = fresh_dir("uqsim_partial_failure");
  ExperimentConfig cfg = smoke_config(dir.string());
  cfg.methods = {"deep_ensemble", "hmc"};
  cfg.run_seeds = {7};
  // Burn longer than the chain: the HMC fit rejects its config at task level.
  cfg.hmc.inference_samples = 10;
  cfg.hmc.inference_burn = 50;

  const RunArtifact artifact = run_experiment(cfg);
  CHECK_FALSE(artifact.ok());
  REQUIRE(artifact.failures.size() == 1);
  CHECK(artifact.failures[0].find("hmc") != std::string::npos);

  // The surviving method's outputs are intact and the artifact verifies.
  const CsvTable table = read_csv((dir / "table1.csv").string());
  REQUIRE(table.rows.size() == 1);
  CHECK(table.rows[0][0] == "deep_ensemble");
  CHECK(fs::exists(dir / "figure_deep_ensemble_40.csv"));
  CHECK(verify_artifact(dir.string()).ok);
  fs::remove_all(dir);
}

TEST_CASE("verify flags a hand-edited figure CSV by name") {
  const fs::path dir = fresh_dir("uqsim_tamper");
  ExperimentConfig cfg = smoke_config(dir.string());
  cfg.methods = {"deep_ensemble", "reference"};
  (void)run_experiment(cfg);

  {
    std::ofstream out(dir / "figure_deep_ensemble_40.csv", std::ios::app);
    out << "tampered\n";
  }
  const VerifyReport report = verify_artifact(dir.string());
  CHECK_FALSE(report.ok);
  bool named = false;
  for (const std::string& line : report.lines)
    if (line.find("FAIL checksum figure_deep_ensemble_40.csv") != std::string::npos) named = true;
  CHECK(named);
  fs::remove_all(dir);
}

TEST_CASE("verify flags a perturbed grid as an identity failure naming the x") {
  const fs::path dir = fresh_dir("uqsim_identity_tamper");
  ExperimentConfig cfg = smoke_config(dir.string());
  cfg.methods = {"reference"};
  cfg.run_seeds = {7};
  (void)run_experiment(cfg);

  // Perturb one grid mean, then refresh its checksum so only the identity
  // replay can catch the edit.
  const fs::path grid_path = dir / "reference_N40_run7_grid.csv";
  auto grids = read_reference_grid_csv(grid_path.string());
  grids[4].predictions[1].mean += 0.5;
  write_reference_grid_csv(grid_path.string(), grids);

  using nlohmann::ordered_json;
  ordered_json manifest;
  {
    std::ifstream in(dir / "manifest.json");
    in >> manifest;
  }
  for (auto& f : manifest.at("files"))
    if (f.at("path") == "reference_N40_run7_grid.csv")
      f["sha256"] = sha256_file_hex(grid_path.string());
  {
    std::ofstream out(dir / "manifest.json");
    out << manifest.dump(2) << "\n";
  }

  const VerifyReport report = verify_artifact(dir.string());
  CHECK_FALSE(report.ok);
  bool named = false;
  for (const std::string& line : report.lines)
    if (line.find("FAIL identity reference_N40_run7_grid.csv at x =") != std::string::npos)
      named = true;
  CHECK(named);
  fs::remove_all(dir);
}
