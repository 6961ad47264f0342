#pragma once

#include <string>
#include <vector>

#include "uqsim/mlp.hpp"

namespace uqsim {

struct UncertaintyEstimate {
  double aleatoric = 0.0;  // variance units, >= 0
  double epistemic = 0.0;  // variance units, >= 0
};

struct SecondOrderSample {
  double query_x = 0.0;
  std::vector<FirstOrderPrediction> members;
};

// Normal-Inverse-Gamma parameters (location, evidence, shape, scale).
struct NigParams {
  double gamma = 0.0;
  double nu = 1.0;     // > 0
  double alpha = 2.0;  // > 1 so the aleatoric moment is finite
  double beta = 1.0;   // > 0

  void validate() const;
};

// Fitted first-order parameters at one query point under resampling of both
// the training data (rows) and the procedural seed (columns).
struct ReferenceGrid {
  double query_x = 0.0;
  int n_d = 0;
  int n_gamma = 0;
  // Row-major n_d x n_gamma.
  std::vector<FirstOrderPrediction> predictions;

  const FirstOrderPrediction& at(int d, int g) const {
    return predictions[static_cast<std::size_t>(d * n_gamma + g)];
  }
  FirstOrderPrediction& at(int d, int g) {
    return predictions[static_cast<std::size_t>(d * n_gamma + g)];
  }
};

struct EpistemicBreakdown {
  double procedural = 0.0;
  double data = 0.0;
  double total = 0.0;
  double bias = 0.0;  // signed: grand-mean prediction minus truth
  double squared_bias = 0.0;
};

// Population-variance split of a second-order sample: aleatoric = mean member
// variance, epistemic = variance of member means. Their sum equals the
// mixture variance exactly.
UncertaintyEstimate variance_decomposition(const SecondOrderSample& sample);

// Closed forms for the NIG family: aleatoric beta/(alpha-1), epistemic
// beta/(nu(alpha-1)).
UncertaintyEstimate der_decomposition(const NigParams& p);

// Variance of the member means over a full grid (population convention).
double grid_total_variance(const ReferenceGrid& grid);

// Law-of-total-variance split over the grid: procedural = mean over rows of
// the within-row variance, data = variance of row means. procedural + data
// equals the total to 1e-9 relative.
EpistemicBreakdown total_variance_split(const ReferenceGrid& grid);

// Fills the bias fields against the true conditional mean and verifies the
// bias-variance identity: mean squared deviation = total variance + bias^2.
EpistemicBreakdown bias_terms(const ReferenceGrid& grid, double truth_mean);

// Full per-point analysis (variance split + bias terms in one record).
EpistemicBreakdown analyze_grid(const ReferenceGrid& grid, double truth_mean);

// The grid flattened into one second-order sample, so the reference
// distribution gets the same aleatoric/epistemic readout as the methods.
SecondOrderSample flatten_grid(const ReferenceGrid& grid);

}  // namespace uqsim
