#pragma once

#include <cstdint>
#include <vector>

#include "uqsim/methods/second_order.hpp"
#include "uqsim/training.hpp"

namespace uqsim {

struct LaplaceConfig {
  double map_lr = 0.005;
  int epochs = 400;
  int batch_size = 64;
  double prior_precision = 1.0;
  // Fixed observation-noise variance used only inside the curvature of the
  // mean head; predictions keep the network's own variance head.
  double noise = 2.0;
  int posterior_samples = 1000;
  std::uint64_t seed = 0;

  void validate() const;
};

// Diagonal posterior variance (GGN + prior_precision * I)^-1; the additive
// prior precision keeps the curvature invertible.
std::vector<double> laplace_posterior_variance(const std::vector<double>& ggn_diag,
                                               double prior_precision);

// MAP estimate via Gaussian-prior-regularized training, Gaussian posterior on
// the GGN diagonal around it; sampling draws weight perturbations.
PredictorPtr fit_laplace(const Dataset& data, const MlpConfig& mcfg, const LaplaceConfig& cfg);

}  // namespace uqsim
