#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "uqsim/tape.hpp"
#include "uqsim/tensor.hpp"

namespace uqsim::ad {

struct ParamEntry {
  std::string name;
  std::vector<std::int64_t> shape;
  std::int64_t offset = 0;
  std::int64_t size = 0;
};

// Flat 64-bit parameter storage with a named layout. Offsets are contiguous
// and non-overlapping; flatten -> unflatten -> flatten is byte-identical.
// Values are immutable snapshots when shared across tasks (copy to mutate).
class ParameterVector {
 public:
  std::int64_t add(std::string name, std::vector<std::int64_t> shape);

  std::int64_t size() const { return static_cast<std::int64_t>(values_.size()); }
  std::size_t entry_count() const { return layout_.size(); }
  const ParamEntry& entry(std::size_t i) const { return layout_[i]; }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  Tensor entry_tensor(std::size_t i) const;
  void set_entry(std::size_t i, const Tensor& t);

  std::vector<Tensor> unflatten() const;
  void assign(const std::vector<double>& flat);

  // One differentiable leaf per entry, in layout order.
  std::vector<ValueId> make_leaves(Tape& tape) const;
  // Gathers per-leaf gradients back into flat layout order.
  std::vector<double> gather_grad(const Tape& tape, const std::vector<ValueId>& leaves) const;

 private:
  std::vector<double> values_;
  std::vector<ParamEntry> layout_;
};

struct GradResult {
  double loss = 0.0;
  std::vector<double> grad;
};

// Builds the loss graph from fresh leaves and returns (loss, flat gradient).
// The callback must return a scalar node. Pure given identical inputs.
using LossFn = std::function<ValueId(Tape&, const std::vector<ValueId>&)>;
GradResult grad_at(const ParameterVector& params, const LossFn& loss_fn);

}  // namespace uqsim::ad
