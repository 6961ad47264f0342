#pragma once

#include <cstdint>
#include <span>

#include "uqsim/methods/second_order.hpp"
#include "uqsim/training.hpp"

namespace uqsim {

struct ViConfig {
  double learning_rate = 0.005;
  int epochs = 500;
  int burn_in_epochs = 200;  // KL term disabled while epoch <= burn_in
  double beta = 5.0;         // multiplier on the KL term
  int train_mc = 10;
  int test_mc = 500;
  int batch_size = 64;
  // Scale-mixture prior pi N(0, sigma1^2) + (1-pi) N(0, sigma2^2); the spike
  // keeps low-signal weights from drifting to unit scale. pi = 1 degenerates
  // to a single Gaussian with an analytic KL.
  double prior_pi = 0.5;
  double prior_sigma1 = 1.0;
  double prior_sigma2 = 0.00247875217667;  // exp(-6)
  double init_rho = -5.0;                  // sigma = softplus(rho)
  std::uint64_t seed = 0;

  void validate() const;
};

// Per-weight KL between diagonal Gaussians, summed over the vector.
double kl_diag_gaussian(std::span<const double> mu_q, std::span<const double> sigma_q,
                        double mu_p, double sigma_p);

// Mean-field Gaussian over all weights trained by maximizing the ELBO with
// reparameterized gradients; per-batch loss is mean NLL plus
// beta/(num_batches * batch) times the KL to the prior.
PredictorPtr fit_vi(const Dataset& data, const MlpConfig& mcfg, const ViConfig& cfg);

}  // namespace uqsim
