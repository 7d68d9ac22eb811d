#ifndef VFSCORE_NUMERICS_TENSOR_HPP_
#define VFSCORE_NUMERICS_TENSOR_HPP_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace vfscore::numerics {

// Dense row-major tensor of doubles. Immutable by convention once it enters
// a ComputationTape; plain value semantics everywhere else.
//
// Construction validates that every entry is finite. Elementwise writes via
// at() are for building values; tape operations re-validate their outputs.
class Tensor {
 public:
  Tensor() = default;
  // Zero-filled tensor of the given shape. Dimensions must be positive.
  explicit Tensor(std::vector<std::size_t> shape);
  // Takes ownership of data; product(shape) must equal data.size() and all
  // entries must be finite.
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor scalar(double v);
  static Tensor vector(std::vector<double> v);
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> data);
  static Tensor zeros_like(const Tensor& t);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  // rows()/cols() view the tensor as a matrix: rank 2 directly, rank 1 as a
  // single row, scalar as 1x1.
  std::size_t rows() const;
  std::size_t cols() const;

  double at(std::size_t i) const { return data_[i]; }
  double& at(std::size_t i) { return data_[i]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }

  // The scalar value; throws ShapeError unless size() == 1.
  double item() const;

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  // Same data, new shape; product must match.
  Tensor reshaped(std::vector<std::size_t> shape) const;

  bool all_finite() const;

  std::string shape_str() const;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

// Max |a-b| over all entries; throws ShapeError on shape mismatch.
double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace vfscore::numerics

#endif  // VFSCORE_NUMERICS_TENSOR_HPP_
