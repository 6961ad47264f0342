#pragma once

#include <span>
#include <vector>

#include "uqsim/param_vector.hpp"
#include "uqsim/tape.hpp"

namespace uqsim::ad {

// One scalar model output together with its curvature weight (the positive
// second derivative of the loss w.r.t. that output).
struct GgnTerm {
  ValueId output;
  double weight;
};

// Diagonal of the generalized Gauss-Newton matrix sum_t w_t * J_t^T J_t,
// accumulated into `acc` (flat parameter layout). Entrywise nonnegative.
void ggn_diag_accumulate(Tape& tape, std::span<const GgnTerm> terms,
                         const ParameterVector& params, const std::vector<ValueId>& leaves,
                         std::vector<double>& acc);

}  // namespace uqsim::ad
