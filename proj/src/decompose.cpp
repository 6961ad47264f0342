#include "uqsim/decompose.hpp"

#include <cmath>

#include "uqsim/errors.hpp"

namespace uqsim {

void NigParams::validate() const {
  if (!(nu > 0.0)) throw ContractViolation("NigParams: nu must be > 0");
  if (!(alpha > 1.0)) throw ContractViolation("NigParams: alpha must be > 1");
  if (!(beta > 0.0)) throw ContractViolation("NigParams: beta must be > 0");
}

namespace {

// Two-pass population variance, shifted by the first element so that a
// constant input yields exactly zero.
template <typename Range, typename Get>
double population_variance_of(const Range& range, Get get) {
  const double n = static_cast<double>(range.size());
  const double shift = get(range[0]);
  double mean = 0.0;
  for (const auto& r : range) mean += get(r) - shift;
  mean /= n;
  double acc = 0.0;
  for (const auto& r : range) {
    const double d = (get(r) - shift) - mean;
    acc += d * d;
  }
  return acc / n;
}

}  // namespace

UncertaintyEstimate variance_decomposition(const SecondOrderSample& sample) {
  if (sample.members.empty()) throw ContractViolation("variance_decomposition: empty sample");
  const double n = static_cast<double>(sample.members.size());
  double mean_var = 0.0;
  for (const FirstOrderPrediction& m : sample.members) mean_var += m.variance;
  mean_var /= n;
  const double spread =
      population_variance_of(sample.members, [](const FirstOrderPrediction& m) { return m.mean; });
  return {mean_var, spread};
}

UncertaintyEstimate der_decomposition(const NigParams& p) {
  p.validate();
  const double aleatoric = p.beta / (p.alpha - 1.0);
  return {aleatoric, aleatoric / p.nu};
}

namespace {

void check_grid(const ReferenceGrid& grid) {
  if (grid.n_d < 2 || grid.n_gamma < 2)
    throw ContractViolation("reference grid: need n_d >= 2 and n_gamma >= 2");
  if (static_cast<int>(grid.predictions.size()) != grid.n_d * grid.n_gamma)
    throw ContractViolation("reference grid: not fully populated");
}

double population_variance(const std::vector<double>& v) {
  return population_variance_of(v, [](double x) { return x; });
}

double grand_mean(const ReferenceGrid& grid) {
  double acc = 0.0;
  for (const FirstOrderPrediction& p : grid.predictions) acc += p.mean;
  return acc / static_cast<double>(grid.predictions.size());
}

}  // namespace

double grid_total_variance(const ReferenceGrid& grid) {
  check_grid(grid);
  std::vector<double> means;
  means.reserve(grid.predictions.size());
  for (const FirstOrderPrediction& p : grid.predictions) means.push_back(p.mean);
  return population_variance(means);
}

EpistemicBreakdown total_variance_split(const ReferenceGrid& grid) {
  check_grid(grid);
  EpistemicBreakdown out;

  std::vector<double> row(static_cast<std::size_t>(grid.n_gamma));
  std::vector<double> row_means;
  row_means.reserve(static_cast<std::size_t>(grid.n_d));
  double procedural = 0.0;
  for (int d = 0; d < grid.n_d; ++d) {
    for (int g = 0; g < grid.n_gamma; ++g) row[static_cast<std::size_t>(g)] = grid.at(d, g).mean;
    procedural += population_variance(row);
    double rm = 0.0;
    for (double m : row) rm += m;
    row_means.push_back(rm / static_cast<double>(grid.n_gamma));
  }
  out.procedural = procedural / static_cast<double>(grid.n_d);
  out.data = population_variance(row_means);
  out.total = grid_total_variance(grid);

  const double residual = std::fabs(out.procedural + out.data - out.total);
  if (residual > 1e-9 * std::max(1.0, out.total))
    throw NumericError("total_variance_split", "law-of-total-variance identity violated");
  return out;
}

EpistemicBreakdown bias_terms(const ReferenceGrid& grid, double truth_mean) {
  check_grid(grid);
  EpistemicBreakdown out;
  out.bias = grand_mean(grid) - truth_mean;
  out.squared_bias = out.bias * out.bias;
  out.total = grid_total_variance(grid);

  double msd = 0.0;
  for (const FirstOrderPrediction& p : grid.predictions) {
    const double d = truth_mean - p.mean;
    msd += d * d;
  }
  msd /= static_cast<double>(grid.predictions.size());
  if (std::fabs(msd - (out.total + out.squared_bias)) > 1e-9 * std::max(1.0, msd))
    throw NumericError("bias_terms", "bias-variance identity violated");
  return out;
}

EpistemicBreakdown analyze_grid(const ReferenceGrid& grid, double truth_mean) {
  EpistemicBreakdown out = total_variance_split(grid);
  const EpistemicBreakdown bias = bias_terms(grid, truth_mean);
  out.bias = bias.bias;
  out.squared_bias = bias.squared_bias;
  return out;
}

SecondOrderSample flatten_grid(const ReferenceGrid& grid) {
  check_grid(grid);
  SecondOrderSample sample;
  sample.query_x = grid.query_x;
  sample.members = grid.predictions;
  return sample;
}

}  // namespace uqsim
