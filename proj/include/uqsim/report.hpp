#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "uqsim/decompose.hpp"

namespace uqsim {

using TruthFn = std::function<double(double)>;

struct RunMetrics {
  std::string method;
  int n = 0;
  std::uint64_t run_seed = 0;
  double mean_aleatoric = 0.0;       // variance units
  double mean_epistemic = 0.0;       // variance units
  double mean_bias = 0.0;            // |mixture mean - f(x)|, grid mean
  double mean_sigma_distance = 0.0;  // |sigma_hat - sigma|, std-dev units
};

// Grid means of the per-point estimates against the truth oracles. Throws a
// reporting error naming the query point on non-finite inputs.
RunMetrics compute_run_metrics(const std::string& method, int n, std::uint64_t run_seed,
                               std::span<const double> xs,
                               std::span<const UncertaintyEstimate> estimates,
                               std::span<const double> mixture_means, const TruthFn& truth_mean,
                               const TruthFn& truth_variance);

struct MetricStats {
  double mean = 0.0;
  double stddev = 0.0;  // sample convention (n-1); 0 for a single run
};

struct AggregateRow {
  std::string method;
  int n = 0;
  MetricStats aleatoric, epistemic, bias, sigma_distance;
  int runs = 0;
  bool single_run = false;
};

// Groups by (method, N) and aggregates across run seeds; rows come out in a
// fixed method order with N ascending.
std::vector<AggregateRow> aggregate_runs(const std::vector<RunMetrics>& runs);

struct FigureSeries {
  std::vector<double> xs;
  std::vector<double> pred_mean;
  std::vector<double> alea_halfwidth;  // 1.96 * sigma_hat
  std::vector<double> true_mean;
  std::vector<double> true_halfwidth;  // 1.96 * sigma
  std::vector<double> epistemic;
};

FigureSeries make_figure_series(std::span<const double> xs,
                                std::span<const UncertaintyEstimate> estimates,
                                std::span<const double> mixture_means, const TruthFn& truth_mean,
                                const TruthFn& truth_variance);

// table1.csv layout.
void emit_table_csv(const std::string& path, const std::vector<AggregateRow>& rows);
// figure_<method>_<N>.csv layout.
void emit_figure_csv(const std::string& path, const FigureSeries& series);

}  // namespace uqsim
