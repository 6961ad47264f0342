#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uqsim/decompose.hpp"

namespace uqsim {

// Uniform adapter over the eight second-order methods: a fitted predictor
// yields, at any query point, a finite set of first-order (mean, variance)
// pairs. Sampling methods consume a single-owner inference stream, so
// sampling calls are non-const and a predictor must not be shared across
// threads while sampling.
class SecondOrderPredictor {
 public:
  virtual ~SecondOrderPredictor() = default;

  virtual std::string name() const = 0;

  // One sample set per query point. `d` is the requested member count;
  // fixed-member predictors (ensembles, retained HMC chains) ignore it.
  virtual std::vector<SecondOrderSample> sample_grid(std::span<const double> xs, int d) = 0;

  SecondOrderSample sample_thetas(double x, int d);

  // Analytic route for the NIG family; nullopt for Monte-Carlo methods.
  virtual std::optional<NigParams> nig_at(double x);

  virtual std::vector<std::string> warnings() const { return {}; }
};

using PredictorPtr = std::unique_ptr<SecondOrderPredictor>;

}  // namespace uqsim
