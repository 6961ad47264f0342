#include "uqsim/methods/second_order.hpp"

#include "uqsim/errors.hpp"

namespace uqsim {

SecondOrderSample SecondOrderPredictor::sample_thetas(double x, int d) {
  if (d < 1) throw ContractViolation("sample_thetas: d must be >= 1");
  const double xs[] = {x};
  return sample_grid(xs, d)[0];
}

std::optional<NigParams> SecondOrderPredictor::nig_at(double) { return std::nullopt; }

}  // namespace uqsim
