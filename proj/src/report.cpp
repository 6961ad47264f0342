#include "uqsim/report.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "uqsim/csv.hpp"
#include "uqsim/errors.hpp"

namespace uqsim {

namespace {

const char* kMethodOrder[] = {"reference", "bootstrap_ensemble", "deep_ensemble", "der",
                              "vi",        "mc_dropout",          "hmc",           "laplace",
                              "gp"};

int method_rank(const std::string& name) {
  for (std::size_t i = 0; i < std::size(kMethodOrder); ++i)
    if (name == kMethodOrder[i]) return static_cast<int>(i);
  return static_cast<int>(std::size(kMethodOrder));
}

MetricStats stats_of(const std::vector<double>& values) {
  MetricStats s;
  const double n = static_cast<double>(values.size());
  for (double v : values) s.mean += v;
  s.mean /= n;
  if (values.size() > 1) {
    double acc = 0.0;
    for (double v : values) acc += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(acc / (n - 1.0));
  }
  return s;
}

}  // namespace

RunMetrics compute_run_metrics(const std::string& method, int n, std::uint64_t run_seed,
                               std::span<const double> xs,
                               std::span<const UncertaintyEstimate> estimates,
                               std::span<const double> mixture_means, const TruthFn& truth_mean,
                               const TruthFn& truth_variance) {
  if (xs.empty()) throw ContractViolation("compute_run_metrics: empty grid");
  if (xs.size() != estimates.size() || xs.size() != mixture_means.size())
    throw ContractViolation("compute_run_metrics: length mismatch");

  RunMetrics m;
  m.method = method;
  m.n = n;
  m.run_seed = run_seed;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const UncertaintyEstimate& e = estimates[i];
    if (!std::isfinite(e.aleatoric) || !std::isfinite(e.epistemic) ||
        !std::isfinite(mixture_means[i]))
      throw NumericError("report", "non-finite estimate at x = " + format_double(xs[i]));
    m.mean_aleatoric += e.aleatoric;
    m.mean_epistemic += e.epistemic;
    m.mean_bias += std::fabs(mixture_means[i] - truth_mean(xs[i]));
    m.mean_sigma_distance += std::fabs(std::sqrt(e.aleatoric) - std::sqrt(truth_variance(xs[i])));
  }
  const double count = static_cast<double>(xs.size());
  m.mean_aleatoric /= count;
  m.mean_epistemic /= count;
  m.mean_bias /= count;
  m.mean_sigma_distance /= count;
  return m;
}

std::vector<AggregateRow> aggregate_runs(const std::vector<RunMetrics>& runs) {
  if (runs.empty()) return {};
  std::map<std::pair<int, std::pair<int, std::string>>, std::vector<RunMetrics>> groups;
  for (const RunMetrics& r : runs)
    groups[{method_rank(r.method), {r.n, r.method}}].push_back(r);

  std::vector<AggregateRow> rows;
  for (const auto& [key, group] : groups) {
    if (group.empty()) throw ContractViolation("aggregate_runs: empty group");
    AggregateRow row;
    row.method = group.front().method;
    row.n = group.front().n;
    row.runs = static_cast<int>(group.size());
    row.single_run = group.size() == 1;
    std::vector<double> a, e, b, s;
    for (const RunMetrics& r : group) {
      a.push_back(r.mean_aleatoric);
      e.push_back(r.mean_epistemic);
      b.push_back(r.mean_bias);
      s.push_back(r.mean_sigma_distance);
    }
    row.aleatoric = stats_of(a);
    row.epistemic = stats_of(e);
    row.bias = stats_of(b);
    row.sigma_distance = stats_of(s);
    rows.push_back(std::move(row));
  }
  return rows;
}

FigureSeries make_figure_series(std::span<const double> xs,
                                std::span<const UncertaintyEstimate> estimates,
                                std::span<const double> mixture_means, const TruthFn& truth_mean,
                                const TruthFn& truth_variance) {
  if (xs.size() != estimates.size() || xs.size() != mixture_means.size())
    throw ContractViolation("make_figure_series: length mismatch");
  FigureSeries f;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    f.xs.push_back(xs[i]);
    f.pred_mean.push_back(mixture_means[i]);
    f.alea_halfwidth.push_back(1.96 * std::sqrt(estimates[i].aleatoric));
    f.true_mean.push_back(truth_mean(xs[i]));
    f.true_halfwidth.push_back(1.96 * std::sqrt(truth_variance(xs[i])));
    f.epistemic.push_back(estimates[i].epistemic);
  }
  return f;
}

void emit_table_csv(const std::string& path, const std::vector<AggregateRow>& rows) {
  std::vector<std::string> lines;
  lines.emplace_back(
      "method,N,aleatoric_mean,aleatoric_std,epistemic_mean,epistemic_std,bias_mean,bias_std,"
      "sigma_dist_mean,sigma_dist_std");
  for (const AggregateRow& r : rows) {
    lines.push_back(r.method + "," + std::to_string(r.n) + "," + format_double(r.aleatoric.mean) +
                    "," + format_double(r.aleatoric.stddev) + "," + format_double(r.epistemic.mean) +
                    "," + format_double(r.epistemic.stddev) + "," + format_double(r.bias.mean) +
                    "," + format_double(r.bias.stddev) + "," + format_double(r.sigma_distance.mean) +
                    "," + format_double(r.sigma_distance.stddev));
  }
  write_lines(path, lines);
}

void emit_figure_csv(const std::string& path, const FigureSeries& series) {
  std::vector<std::string> lines;
  lines.emplace_back("x,pred_mean,alea_halfwidth,true_mean,true_halfwidth,epistemic");
  for (std::size_t i = 0; i < series.xs.size(); ++i) {
    lines.push_back(format_double(series.xs[i]) + "," + format_double(series.pred_mean[i]) + "," +
                    format_double(series.alea_halfwidth[i]) + "," +
                    format_double(series.true_mean[i]) + "," +
                    format_double(series.true_halfwidth[i]) + "," +
                    format_double(series.epistemic[i]));
  }
  write_lines(path, lines);
}

}  // namespace uqsim
