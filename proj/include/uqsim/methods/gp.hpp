#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>

#include "uqsim/dgp.hpp"
#include "uqsim/methods/second_order.hpp"

namespace uqsim {

struct RbfKernel {
  double lengthscale = 0.1;
  double signal_variance = 1.0;

  double operator()(double a, double b) const;
};

struct GpConfig {
  int inducing = 256;  // effective count is min(inducing, N)
  double learning_rate = 0.005;
  int epochs = 2000;
  double jitter = 1e-6;      // escalates x10 on factorization failure
  double max_jitter = 1e-4;  // beyond this the fit is a method error
  int default_samples = 500;
  std::uint64_t seed = 0;

  void validate() const;
};

// Lower Cholesky factor of K + jitter*I with x10 escalation up to max_jitter.
struct CholeskyWithJitter {
  Eigen::MatrixXd lower;
  double jitter_used = 0.0;
};
CholeskyWithJitter cholesky_with_jitter(const Eigen::MatrixXd& k, double jitter,
                                        double max_jitter);

// Exact GP regression posterior mean (the noiseless-interpolation oracle).
std::vector<double> exact_gp_posterior_mean(std::span<const double> x_train,
                                            std::span<const double> y_train, const RbfKernel& k,
                                            double noise_variance,
                                            std::span<const double> x_query);

// One whitened variational latent process over inducing points.
struct LatentProcess {
  RbfKernel kernel;
  Eigen::VectorXd inducing;   // Z
  Eigen::MatrixXd chol_kzz;   // L with K_zz + jitter = L L^T
  Eigen::VectorXd whitened_mean;
  Eigen::MatrixXd whitened_sqrt;  // lower-triangular C, q(u) = N(L(m..), ...)
  double mean_offset = 0.0;       // constant mean function
};

struct GpPosterior {
  LatentProcess mean_process;
  LatentProcess noise_process;  // models log sigma^2
  double jitter_used = 0.0;
  double final_objective = 0.0;
};

// Two latent RBF processes (mean and log-noise) fit by maximizing the ELBO
// over the whitened variational parameters; sampling draws joint inducing
// samples plus the per-point residual and maps the noise process through exp.
PredictorPtr fit_hetero_gp(const Dataset& data, const GpConfig& cfg);

// Read-only view of the fitted posterior (for diagnostics and tests).
const GpPosterior& gp_posterior(const SecondOrderPredictor& predictor);

}  // namespace uqsim
