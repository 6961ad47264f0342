#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "uqsim/methods/second_order.hpp"
#include "uqsim/training.hpp"

namespace uqsim {

// Potential energy U(q) = -log target(q) and its gradient, evaluated together.
struct PotentialValue {
  double value = 0.0;
  std::vector<double> grad;
};
using PotentialFn = std::function<PotentialValue(const std::vector<double>&)>;

// Velocity-Verlet leapfrog with unit mass; q and p are updated in place.
// Returns the potential (with gradient) at the final position.
PotentialValue leapfrog(const PotentialFn& potential, std::vector<double>& q,
                        std::vector<double>& p, double step, int n_steps);

struct HmcChain {
  std::vector<std::vector<double>> samples;  // one entry per iteration
  int accepted = 0;
  int proposed = 0;
  double acceptance_rate() const {
    return proposed > 0 ? static_cast<double>(accepted) / proposed : 0.0;
  }
};

// Metropolis-adjusted HMC with unit mass matrix. Each iteration records the
// current position (new on accept, old on reject).
HmcChain hmc_sample(const PotentialFn& potential, std::vector<double> init, int n_samples,
                    double step, int leapfrog_steps, RandomStream& stream);

struct HmcConfig {
  double pretrain_lr = 0.009;
  int pretrain_epochs = 2000;
  int batch_size = 64;
  int n_samples = 200;  // adaptation chain
  double step = 0.00015;
  int leapfrog_steps = 10;
  int burn = 50;
  double tau = 1.0;  // isotropic Gaussian prior precision over the weights
  int inference_samples = 1000;
  int inference_burn = 50;

  std::uint64_t seed = 0;

  void validate() const;
};

// Pretrains to a posterior mode, runs an adaptation chain, then an inference
// chain whose post-burn samples are retained; prediction mixes the retained
// weight samples. An acceptance rate below 1% is attached as a warning.
PredictorPtr fit_hmc(const Dataset& data, const MlpConfig& mcfg, const HmcConfig& cfg);

}  // namespace uqsim
