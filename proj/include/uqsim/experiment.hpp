#pragma once

#include <string>
#include <vector>

#include "uqsim/config.hpp"
#include "uqsim/decompose.hpp"
#include "uqsim/report.hpp"

namespace uqsim {

struct RunArtifact {
  std::string output_dir;
  std::vector<std::string> files;  // relative paths listed in the manifest
  std::vector<std::string> failures;
  std::vector<std::string> warnings;
  std::vector<AggregateRow> table;

  bool ok() const { return failures.empty(); }
};

// Executes every (method, N, run_seed) task plus the reference protocol,
// aggregates metrics and writes the artifact (CSVs, config snapshot,
// manifest, log) under cfg.output_dir. Task failures are recorded and do not
// abort the rest of the run.
RunArtifact run_experiment(const ExperimentConfig& cfg);

// Single-task evaluation hooks; these execute exactly what run_experiment
// schedules for one (method, N, run_seed) cell, so external drivers (the
// acceptance suite) measure the same numbers the artifact holds.
struct MethodEvaluation {
  RunMetrics metrics;
  std::vector<UncertaintyEstimate> estimates;
  std::vector<double> mixture_means;
  std::vector<std::string> warnings;
};
MethodEvaluation evaluate_method(const ExperimentConfig& cfg, const std::string& method,
                                 std::size_t size_idx, std::uint64_t run_seed,
                                 const std::vector<double>& grid);

struct ReferenceEvaluation {
  RunMetrics metrics;
  std::vector<EpistemicBreakdown> breakdowns;
  std::vector<UncertaintyEstimate> estimates;
};
ReferenceEvaluation evaluate_reference(const ExperimentConfig& cfg, std::size_t size_idx,
                                       std::uint64_t run_seed, const std::vector<double>& grid,
                                       int parallelism);

struct VerifyReport {
  bool ok = true;
  std::vector<std::string> lines;
};

// Recomputes manifest checksums and replays the decomposition identities on
// every stored reference grid against its report file.
VerifyReport verify_artifact(const std::string& dir);

// Reference grids on disk: columns x,d_index,gamma_index,mean,variance.
void write_reference_grid_csv(const std::string& path, const std::vector<ReferenceGrid>& grids);
std::vector<ReferenceGrid> read_reference_grid_csv(const std::string& path);

// Per-point uncertainty report: columns
// x,aleatoric,epistemic,procedural,data,total,bias,true_sigma2.
void write_reference_report_csv(const std::string& path, const std::vector<ReferenceGrid>& grids,
                                const std::vector<EpistemicBreakdown>& breakdowns,
                                const std::vector<UncertaintyEstimate>& estimates);

}  // namespace uqsim
