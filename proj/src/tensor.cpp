#include "uqsim/tensor.hpp"

#include <cmath>

#include "uqsim/errors.hpp"

namespace uqsim::ad {

namespace {
std::int64_t shape_product(const std::vector<std::int64_t>& shape) {
  std::int64_t n = 1;
  for (std::int64_t d : shape) {
    if (d < 0) throw ContractViolation("tensor: negative dimension");
    n *= d;
  }
  return n;
}
}  // namespace

Tensor::Tensor(std::vector<std::int64_t> shape)
    : shape_(std::move(shape)), data_(static_cast<std::size_t>(shape_product(shape_)), 0.0) {
  if (shape_.size() > 2) throw ContractViolation("tensor: rank > 2 unsupported");
}

Tensor::Tensor(std::vector<std::int64_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_.size() > 2) throw ContractViolation("tensor: rank > 2 unsupported");
  if (shape_product(shape_) != static_cast<std::int64_t>(data_.size()))
    throw ContractViolation("tensor: shape/data size mismatch");
}

Tensor Tensor::scalar(double v) { return Tensor({}, {v}); }

Tensor Tensor::vector(std::vector<double> v) {
  const std::int64_t n = static_cast<std::int64_t>(v.size());
  return Tensor({n}, std::move(v));
}

Tensor Tensor::matrix(std::int64_t rows, std::int64_t cols) { return Tensor({rows, cols}); }

std::int64_t Tensor::rows() const { return shape_.size() == 2 ? shape_[0] : 1; }

std::int64_t Tensor::cols() const {
  if (shape_.empty()) return 1;
  return shape_.back();
}

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace uqsim::ad
