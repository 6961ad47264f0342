#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace uqsim {

struct TestGridSpec {
  int count = 500;
  double lo = 0.01;
  double hi = 0.99;

  std::vector<double> points() const;
};

// Per-size integer lists run parallel to sample_sizes.
struct DeepEnsembleBlock {
  int members = 10;
  double learning_rate = 0.009;
  std::vector<int> epochs = {50, 250, 500};
};

struct BootstrapBlock {
  int members = 10;
  double learning_rate = 0.009;
  std::vector<int> epochs = {50, 250, 500};
  double fraction = 0.6;
};

struct McDropoutBlock {
  double rate = 0.2;
  double learning_rate = 0.002;
  int epochs = 500;
  int passes = 500;
};

struct ViBlock {
  double learning_rate = 0.005;
  int epochs = 250;  // 50 ELBO epochs after the burn-in
  int burn_in = 200;
  double beta = 5.0;
  int train_mc = 10;
  int test_mc = 500;
};

struct LaplaceBlock {
  double learning_rate = 0.005;
  std::vector<int> epochs = {200, 400, 800};
  std::vector<int> batch_sizes = {32, 32, 128};
  double prior_precision = 1.0;
  double noise = 2.0;
  int posterior_samples = 1000;
};

struct HmcBlock {
  double pretrain_lr = 0.009;
  std::vector<int> pretrain_epochs = {1000, 2000, 3000};
  std::vector<int> batch_sizes = {32, 32, 128};
  int n_samples = 200;
  double step = 0.00015;
  int leapfrog_steps = 10;
  int burn = 50;
  double tau = 1.0;
  int inference_samples = 1000;
  int inference_burn = 50;
};

struct DerBlock {
  double learning_rate = 0.0003;
  int epochs = 5000;
  double lambda = 0.01;
};

struct GpBlock {
  int inducing = 256;
  double learning_rate = 0.005;
  int epochs = 2000;
  int samples = 500;
};

struct ReferenceBlock {
  double learning_rate = 0.009;
  int epochs = 500;
};

struct ExperimentConfig {
  std::vector<std::string> methods = {"reference",  "deep_ensemble", "bootstrap_ensemble",
                                      "mc_dropout", "vi",            "laplace",
                                      "hmc",        "der",           "gp"};
  std::vector<int> sample_sizes = {50, 100, 500};
  std::vector<int> batch_sizes = {32, 32, 64};
  std::vector<std::uint64_t> run_seeds = {7, 42, 123, 999, 2024};
  std::vector<std::uint64_t> dataset_seeds = {7,   42,  2024, 123, 999, 50,  100, 150, 200, 250,
                                              300, 350, 400,  450, 500, 550, 600, 650, 700, 750};
  int n_d = 20;
  int n_gamma = 10;
  TestGridSpec test_grid;
  double region_split = 0.2;
  std::string output_dir;
  int parallelism = 0;  // 0 -> hardware concurrency

  DeepEnsembleBlock deep_ensemble;
  BootstrapBlock bootstrap_ensemble;
  McDropoutBlock mc_dropout;
  ViBlock vi;
  LaplaceBlock laplace;
  HmcBlock hmc;
  DerBlock der;
  GpBlock gp;
  ReferenceBlock reference;

  void validate() const;
  std::string to_json() const;  // fully resolved snapshot
};

// Strict parse: unknown keys are configuration errors naming the key path;
// missing keys keep their defaults. Empty text means an all-default config.
ExperimentConfig parse_config_text(const std::string& json_text);
ExperimentConfig parse_config_file(const std::string& path);

bool is_known_method(const std::string& name);

}  // namespace uqsim
