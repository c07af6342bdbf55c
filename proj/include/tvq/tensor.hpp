#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tvq/errors.hpp"

namespace tvq {

/// Dense row-major tensor of 64-bit floats. Rank is dynamic but in practice
/// everything in this codebase is rank 1 or 2.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int> shape, double value);
  static Tensor from(std::vector<int> shape, std::vector<double> values);
  static Tensor row_vector(std::vector<double> values);

  int ndim() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  const std::vector<int>& shape() const { return shape_; }
  std::int64_t size() const { return static_cast<std::int64_t>(values_.size()); }
  bool empty() const { return values_.empty(); }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  double& at(std::int64_t i) { return values_[static_cast<std::size_t>(i)]; }
  double at(std::int64_t i) const { return values_[static_cast<std::size_t>(i)]; }
  double& at(int r, int c) { return values_[static_cast<std::size_t>(r) * cols() + static_cast<std::size_t>(c)]; }
  double at(int r, int c) const { return values_[static_cast<std::size_t>(r) * cols() + static_cast<std::size_t>(c)]; }

  /// Rows/cols of a rank-2 tensor (rank-1 counts as a single row).
  int rows() const { return ndim() == 2 ? shape_[0] : (ndim() == 1 ? 1 : 0); }
  int cols() const { return ndim() == 2 ? shape_[1] : (ndim() == 1 ? shape_[0] : 0); }

  const double* row_ptr(int r) const { return data() + static_cast<std::size_t>(r) * cols(); }
  double* row_ptr(int r) { return data() + static_cast<std::size_t>(r) * cols(); }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;
  void fill(double value);

  std::string shape_str() const;

 private:
  std::vector<int> shape_;
  std::vector<double> values_;
};

std::int64_t shape_product(const std::vector<int>& shape);

/// Throws DimensionError unless both tensors have identical shapes.
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

}  // namespace tvq
