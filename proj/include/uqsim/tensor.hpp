#pragma once

#include <cstdint>
#include <vector>

namespace uqsim::ad {

// Dense 64-bit float tensor, row-major, rank 0 (scalar), 1 (vector) or 2
// (matrix). product(shape) == data.size() always.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::int64_t> shape);
  Tensor(std::vector<std::int64_t> shape, std::vector<double> data);

  static Tensor scalar(double v);
  static Tensor vector(std::vector<double> v);
  static Tensor matrix(std::int64_t rows, std::int64_t cols);

  const std::vector<std::int64_t>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }

  // 2-D views: scalars are 1x1, vectors 1xn.
  std::int64_t rows() const;
  std::int64_t cols() const;

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  double operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  bool all_finite() const;

 private:
  std::vector<std::int64_t> shape_;
  std::vector<double> data_;
};

}  // namespace uqsim::ad
