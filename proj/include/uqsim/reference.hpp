#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "uqsim/decompose.hpp"
#include "uqsim/dgp.hpp"
#include "uqsim/training.hpp"

namespace uqsim {

struct ReferenceConfig {
  int n_d = 20;
  int n_gamma = 10;
  // First n_d entries are used as dataset-generation seeds.
  std::vector<std::uint64_t> dataset_seeds;
  // Procedural seeds are split from this master seed, one per gamma column
  // and shared across dataset rows (the gamma draws are fixed).
  std::uint64_t proc_master_seed = 0;
  MlpConfig mlp;
  TrainConfig train;
  int parallelism = 1;

  void validate() const;
};

struct ReferenceResult {
  std::vector<double> query_xs;
  // One grid per query point, over the rows that completed fully.
  std::vector<ReferenceGrid> grids;
  std::vector<EpistemicBreakdown> breakdowns;
  // Variance decomposition of the pooled sample at each query point.
  std::vector<UncertaintyEstimate> estimates;
  std::vector<std::pair<int, int>> failed_cells;  // (d, gamma)
  std::vector<std::string> cell_errors;
};

// Trains n_d x n_gamma predictors (dataset seed x procedural seed), fills the
// per-point grids and computes variance splits and bias against f_true.
// Failed cells are tolerated up to 10%; rows containing a failure are dropped
// from the grids so the variance identities stay exact.
ReferenceResult estimate_reference(const DgpSpec& spec, int n, const ReferenceConfig& cfg,
                                   std::span<const double> query_xs);

}  // namespace uqsim
