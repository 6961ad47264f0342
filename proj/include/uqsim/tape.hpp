#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "uqsim/tensor.hpp"

namespace uqsim::ad {

enum class Op : std::uint8_t {
  kLeaf,
  kConst,
  kMatmul,
  kAdd,
  kSub,
  kMul,
  kNeg,
  kRelu,
  kTanh,
  kExp,
  kLog,
  kSin,
  kSoftplus,
  kSquare,
  kAbs,
  kLgamma,
  kAffine,  // c0 * x + c1, elementwise
  kSum,
  kMean,
};

const char* op_name(Op op);

using ValueId = std::int32_t;

// Dynamic reverse-mode tape. Nodes are appended in topological order during
// the forward pass; backward() walks them in exact reverse order. Every
// forward op validates shapes and rejects non-finite outputs.
//
// Tapes are single-threaded; distinct tapes may run concurrently.
class Tape {
 public:
  ValueId leaf(Tensor t);      // differentiable input (parameter)
  ValueId constant(Tensor t);  // non-differentiable input (data)

  ValueId matmul(ValueId a, ValueId b);
  // add/sub/mul accept equal shapes, or broadcast b when b is a vector
  // matching a's trailing dimension, or when b is a scalar.
  ValueId add(ValueId a, ValueId b);
  ValueId sub(ValueId a, ValueId b);
  ValueId mul(ValueId a, ValueId b);
  ValueId neg(ValueId a);
  ValueId relu(ValueId a);
  ValueId tanh(ValueId a);
  ValueId exp(ValueId a);
  ValueId log(ValueId a);
  ValueId sin(ValueId a);
  ValueId softplus(ValueId a);
  ValueId square(ValueId a);
  ValueId abs(ValueId a);
  ValueId lgamma(ValueId a);
  ValueId affine(ValueId a, double scale, double shift);
  ValueId sum(ValueId a);
  ValueId mean(ValueId a);

  const Tensor& value(ValueId id) const { return nodes_[static_cast<std::size_t>(id)].out; }
  // Valid after backward(); zero tensor for nodes the root does not reach.
  const Tensor& grad(ValueId id) const;

  // Accumulates gradients of the scalar node `root` into every reachable
  // differentiable node. Throws ContractViolation if root is not scalar.
  void backward(ValueId root);

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Op op;
    ValueId a = -1;
    ValueId b = -1;
    double c0 = 0.0;
    double c1 = 0.0;
    bool needs_grad = false;
    Tensor out;
    Tensor grad;
  };

  ValueId push(Node n, const char* name);
  ValueId unary(Op op, ValueId a, double c0 = 0.0, double c1 = 0.0);
  ValueId binary(Op op, ValueId a, ValueId b);
  const Node& at(ValueId id) const { return nodes_[static_cast<std::size_t>(id)]; }
  Node& at(ValueId id) { return nodes_[static_cast<std::size_t>(id)]; }

  std::vector<Node> nodes_;
};

// Accurate digamma (derivative of lgamma); exposed for tests.
double digamma(double x);

}  // namespace uqsim::ad
