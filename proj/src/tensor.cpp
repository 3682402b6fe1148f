#include "vqseg/tensor.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>

namespace vqseg {

int64_t shape_numel(const std::vector<int64_t>& shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

Tensor::Tensor(std::vector<int64_t> shape) : shape_(std::move(shape)) {
  for (int64_t d : shape_)
    if (d < 0) throw std::invalid_argument("negative tensor dimension");
  data_.assign(static_cast<std::size_t>(shape_numel(shape_)), 0.0);
}

Tensor Tensor::full(std::vector<int64_t> shape, double v) {
  Tensor t(std::move(shape));
  t.fill(v);
  return t;
}

Tensor Tensor::scalar(double v) {
  Tensor t(std::vector<int64_t>{});
  t.data_.assign(1, v);
  return t;
}

Tensor Tensor::from(std::vector<int64_t> shape, std::vector<double> data) {
  Tensor t;
  t.shape_ = std::move(shape);
  if (shape_numel(t.shape_) != static_cast<int64_t>(data.size()))
    throw std::invalid_argument("tensor data length does not match shape");
  t.data_ = std::move(data);
  return t;
}

int64_t Tensor::index(std::initializer_list<int64_t> idx) const {
  if (idx.size() != shape_.size())
    throw std::invalid_argument("tensor index rank mismatch");
  int64_t flat = 0;
  std::size_t i = 0;
  for (int64_t v : idx) {
    flat = flat * shape_[i] + v;
    ++i;
  }
  return flat;
}

void Tensor::fill(double v) { data_.assign(data_.size(), v); }

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace vqseg
