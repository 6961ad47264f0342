#pragma once

#include <cstdint>

#include "uqsim/methods/second_order.hpp"
#include "uqsim/training.hpp"

namespace uqsim {

// d networks trained on the same dataset, differing only in the procedural
// seed; the sampled second-order distribution is the set of member
// predictions (an equally weighted Dirac mixture).
PredictorPtr fit_deep_ensemble(const Dataset& data, const MlpConfig& mcfg, const TrainConfig& tcfg,
                               const std::vector<std::uint64_t>& member_seeds);

// As the deep ensemble, but each member trains on a with-replacement resample
// of ceil(fraction * N) points drawn from its own stream. Resample indices
// are deterministic per (dataset seed, member seed).
PredictorPtr fit_bootstrap_ensemble(const Dataset& data, const MlpConfig& mcfg,
                                    const TrainConfig& tcfg,
                                    const std::vector<std::uint64_t>& member_seeds,
                                    double fraction);

// One dropout-trained network; sampling performs stochastic forward passes
// with a fresh mask per pass (each pass is one subnetwork applied to the
// whole grid).
PredictorPtr fit_mc_dropout(const Dataset& data, const MlpConfig& mcfg, const TrainConfig& tcfg,
                            double rate);

}  // namespace uqsim
