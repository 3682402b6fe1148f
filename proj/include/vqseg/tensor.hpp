#pragma once

#include <cstdint>
#include <initializer_list>
#include <vector>

namespace vqseg {

// Dense row-major tensor of doubles. Value semantics.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int64_t> shape);

  static Tensor zeros(std::vector<int64_t> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int64_t> shape, double v);
  static Tensor scalar(double v);
  static Tensor from(std::vector<int64_t> shape, std::vector<double> data);

  const std::vector<int64_t>& shape() const { return shape_; }
  int64_t dim(std::size_t i) const { return shape_[i]; }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }
  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  double operator[](int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  // Flat index from multi-index, row-major.
  int64_t index(std::initializer_list<int64_t> idx) const;
  double& at(std::initializer_list<int64_t> idx) { return data_[static_cast<std::size_t>(index(idx))]; }
  double at(std::initializer_list<int64_t> idx) const { return data_[static_cast<std::size_t>(index(idx))]; }

  void fill(double v);
  bool all_finite() const;

 private:
  std::vector<int64_t> shape_;
  std::vector<double> data_;
};

int64_t shape_numel(const std::vector<int64_t>& shape);

}  // namespace vqseg
