#include "uqsim/ggn.hpp"

#include "uqsim/errors.hpp"

namespace uqsim::ad {

void ggn_diag_accumulate(Tape& tape, std::span<const GgnTerm> terms,
                         const ParameterVector& params, const std::vector<ValueId>& leaves,
                         std::vector<double>& acc) {
  if (acc.size() != params.values().size())
    throw ContractViolation("ggn_diag_accumulate: accumulator size mismatch");
  for (const GgnTerm& term : terms) {
    if (term.weight < 0.0) throw ContractViolation("ggn_diag_accumulate: negative weight");
    tape.backward(term.output);
    const std::vector<double> j = params.gather_grad(tape, leaves);
    for (std::size_t i = 0; i < j.size(); ++i) acc[i] += term.weight * j[i] * j[i];
  }
}

}  // namespace uqsim::ad
