#include "uqsim/param_vector.hpp"

#include <algorithm>

#include "uqsim/errors.hpp"

namespace uqsim::ad {

std::int64_t ParameterVector::add(std::string name, std::vector<std::int64_t> shape) {
  std::int64_t n = 1;
  for (std::int64_t d : shape) n *= d;
  ParamEntry e;
  e.name = std::move(name);
  e.shape = std::move(shape);
  e.offset = size();
  e.size = n;
  layout_.push_back(e);
  values_.resize(values_.size() + static_cast<std::size_t>(n), 0.0);
  return e.offset;
}

Tensor ParameterVector::entry_tensor(std::size_t i) const {
  const ParamEntry& e = layout_[i];
  std::vector<double> data(values_.begin() + e.offset, values_.begin() + e.offset + e.size);
  return Tensor(e.shape, std::move(data));
}

void ParameterVector::set_entry(std::size_t i, const Tensor& t) {
  const ParamEntry& e = layout_[i];
  if (t.size() != e.size) throw ContractViolation("set_entry: size mismatch for " + e.name);
  std::copy(t.data(), t.data() + e.size, values_.begin() + e.offset);
}

std::vector<Tensor> ParameterVector::unflatten() const {
  std::vector<Tensor> out;
  out.reserve(layout_.size());
  for (std::size_t i = 0; i < layout_.size(); ++i) out.push_back(entry_tensor(i));
  return out;
}

void ParameterVector::assign(const std::vector<double>& flat) {
  if (flat.size() != values_.size()) throw ContractViolation("assign: size mismatch");
  values_ = flat;
}

std::vector<ValueId> ParameterVector::make_leaves(Tape& tape) const {
  std::vector<ValueId> leaves;
  leaves.reserve(layout_.size());
  for (std::size_t i = 0; i < layout_.size(); ++i) leaves.push_back(tape.leaf(entry_tensor(i)));
  return leaves;
}

std::vector<double> ParameterVector::gather_grad(const Tape& tape,
                                                 const std::vector<ValueId>& leaves) const {
  if (leaves.size() != layout_.size()) throw ContractViolation("gather_grad: leaf count mismatch");
  std::vector<double> flat(values_.size(), 0.0);
  for (std::size_t i = 0; i < layout_.size(); ++i) {
    const Tensor& g = tape.grad(leaves[i]);
    const ParamEntry& e = layout_[i];
    std::copy(g.data(), g.data() + e.size, flat.begin() + e.offset);
  }
  return flat;
}

GradResult grad_at(const ParameterVector& params, const LossFn& loss_fn) {
  Tape tape;
  const std::vector<ValueId> leaves = params.make_leaves(tape);
  const ValueId root = loss_fn(tape, leaves);
  if (tape.value(root).size() != 1) throw ContractViolation("grad_at: loss must be scalar");
  tape.backward(root);
  GradResult r;
  r.loss = tape.value(root)[0];
  r.grad = params.gather_grad(tape, leaves);
  return r;
}

}  // namespace uqsim::ad
