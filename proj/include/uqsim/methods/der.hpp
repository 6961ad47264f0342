#pragma once

#include <cstdint>

#include "uqsim/methods/second_order.hpp"
#include "uqsim/training.hpp"

namespace uqsim {

struct DerConfig {
  double learning_rate = 0.0003;
  int epochs = 5000;
  int batch_size = 64;
  double lambda = 0.01;  // evidence regularizer strength
  std::uint64_t seed = 0;

  void validate() const;
};

// Applies the head link functions: nu = softplus, beta = softplus,
// alpha = 1 + softplus, each floored away from its boundary.
NigParams nig_link(double raw_gamma, double raw_nu, double raw_alpha, double raw_beta);

// Four-head MLP trained on the NIG marginal negative log-likelihood (a
// Student-t likelihood) plus lambda * |y - gamma| * (2 nu + alpha).
// The analytic NIG route (nig_at) is the primary output; sample_thetas draws
// members from the fitted NIG for the uniform adapter contract.
PredictorPtr fit_der(const Dataset& data, const MlpConfig& base_cfg, const DerConfig& cfg);

}  // namespace uqsim
