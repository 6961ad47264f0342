// Command-line surface for the uncertainty-disentanglement harness.
//
//   uqsim run        full experiment from a config file
//   uqsim reference  reference-distribution protocol only
//   uqsim decompose  recompute the per-point decomposition of a stored grid
//   uqsim verify     checksum + identity replay of a run directory
//
// Exit codes: 0 success, 1 task failure, 2 configuration error.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "uqsim/dgp.hpp"
#include "uqsim/errors.hpp"
#include "uqsim/experiment.hpp"

using namespace uqsim;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string output_dir;
  int parallelism = -1;
  std::vector<std::string> methods;
  std::vector<int> sizes;
  std::int64_t seed = -1;
  int n_d = -1;
  int n_gamma = -1;
};

ExperimentConfig load_config(const CommonArgs& args) {
  ExperimentConfig cfg =
      args.config_path.empty() ? parse_config_text("") : parse_config_file(args.config_path);
  if (!args.output_dir.empty()) cfg.output_dir = args.output_dir;
  if (cfg.output_dir.empty()) {
    const char* env = std::getenv("UQSIM_OUTPUT_DIR");
    cfg.output_dir = env && *env ? env : "uqsim_out";
  }
  if (args.parallelism >= 0) cfg.parallelism = args.parallelism;
  if (!args.methods.empty()) cfg.methods = args.methods;
  if (args.seed >= 0) cfg.run_seeds = {static_cast<std::uint64_t>(args.seed)};
  if (args.n_d > 0) cfg.n_d = args.n_d;
  if (args.n_gamma > 0) cfg.n_gamma = args.n_gamma;

  if (!args.sizes.empty()) {
    ExperimentConfig filtered = cfg;
    filtered.sample_sizes.clear();
    filtered.batch_sizes.clear();
    filtered.deep_ensemble.epochs.clear();
    filtered.bootstrap_ensemble.epochs.clear();
    filtered.laplace.epochs.clear();
    filtered.laplace.batch_sizes.clear();
    filtered.hmc.pretrain_epochs.clear();
    filtered.hmc.batch_sizes.clear();
    for (int want : args.sizes) {
      bool found = false;
      for (std::size_t i = 0; i < cfg.sample_sizes.size(); ++i) {
        if (cfg.sample_sizes[i] != want) continue;
        filtered.sample_sizes.push_back(cfg.sample_sizes[i]);
        filtered.batch_sizes.push_back(cfg.batch_sizes[i]);
        filtered.deep_ensemble.epochs.push_back(cfg.deep_ensemble.epochs[i]);
        filtered.bootstrap_ensemble.epochs.push_back(cfg.bootstrap_ensemble.epochs[i]);
        filtered.laplace.epochs.push_back(cfg.laplace.epochs[i]);
        filtered.laplace.batch_sizes.push_back(cfg.laplace.batch_sizes[i]);
        filtered.hmc.pretrain_epochs.push_back(cfg.hmc.pretrain_epochs[i]);
        filtered.hmc.batch_sizes.push_back(cfg.hmc.batch_sizes[i]);
        found = true;
        break;
      }
      if (!found)
        throw ConfigError("--sizes: " + std::to_string(want) +
                          " is not in the configured sample_sizes");
    }
    cfg = filtered;
  }

  cfg.validate();
  return cfg;
}

int do_run(const ExperimentConfig& cfg) {
  const RunArtifact artifact = run_experiment(cfg);
  for (const std::string& w : artifact.warnings) std::cout << "warning: " << w << "\n";
  for (const std::string& f : artifact.failures) std::cout << "failure: " << f << "\n";
  std::cout << "artifact: " << artifact.output_dir << " (" << artifact.files.size() << " files, "
            << artifact.table.size() << " table rows)\n";
  return artifact.ok() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Second-order uncertainty disentanglement harness"};
  app.require_subcommand(1);

  CommonArgs args;

  CLI::App* run = app.add_subcommand("run", "Run the configured experiment");
  run->add_option("--config", args.config_path, "JSON config file");
  run->add_option("--output-dir", args.output_dir, "Artifact directory");
  run->add_option("--parallelism", args.parallelism, "Max concurrent trainings");
  run->add_option("--methods", args.methods, "Subset of methods")->delimiter(',');
  run->add_option("--sizes", args.sizes, "Subset of sample sizes")->delimiter(',');
  run->add_option("--seed", args.seed, "Single run seed replacing the list");

  CLI::App* reference = app.add_subcommand("reference", "Run the reference protocol only");
  reference->add_option("--config", args.config_path, "JSON config file");
  reference->add_option("--output-dir", args.output_dir, "Artifact directory");
  reference->add_option("--parallelism", args.parallelism, "Max concurrent trainings");
  reference->add_option("--sizes", args.sizes, "Subset of sample sizes")->delimiter(',');
  reference->add_option("--seed", args.seed, "Single run seed replacing the list");
  reference->add_option("--n-d", args.n_d, "Dataset draws");
  reference->add_option("--n-gamma", args.n_gamma, "Procedural draws");

  std::string grid_path, report_out;
  CLI::App* decompose = app.add_subcommand("decompose", "Replay decompositions of a stored grid");
  decompose->add_option("--grid", grid_path, "Grid CSV (x,d_index,gamma_index,mean,variance)")
      ->required();
  decompose->add_option("--output", report_out, "Report CSV destination");

  std::string verify_dir;
  CLI::App* verify = app.add_subcommand("verify", "Validate a run artifact");
  verify->add_option("--dir", verify_dir, "Artifact directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return do_run(load_config(args));

    if (reference->parsed()) {
      ExperimentConfig cfg = load_config(args);
      cfg.methods = {"reference"};
      return do_run(cfg);
    }

    if (decompose->parsed()) {
      const std::vector<ReferenceGrid> grids = read_reference_grid_csv(grid_path);
      std::vector<EpistemicBreakdown> breakdowns;
      std::vector<UncertaintyEstimate> estimates;
      for (const ReferenceGrid& g : grids) {
        breakdowns.push_back(analyze_grid(g, f_true(g.query_x)));
        estimates.push_back(variance_decomposition(flatten_grid(g)));
      }
      if (report_out.empty()) {
        std::filesystem::path p(grid_path);
        p.replace_extension();
        report_out = p.string() + "_report.csv";
      }
      write_reference_report_csv(report_out, grids, breakdowns, estimates);
      std::cout << "wrote " << report_out << " (" << grids.size() << " points)\n";
      return 0;
    }

    if (verify->parsed()) {
      const VerifyReport report = verify_artifact(verify_dir);
      for (const std::string& line : report.lines) std::cout << line << "\n";
      std::cout << (report.ok ? "artifact OK" : "artifact INVALID") << "\n";
      return report.ok ? 0 : 1;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
