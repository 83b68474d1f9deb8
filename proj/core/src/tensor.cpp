// Copyright (c) 2026 MADM Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
#include "madm/tensor.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace madm {

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
  if (shape_.empty() || shape_.size() > 4)
    throw ShapeError("tensor rank must be in [1, 4], got " + std::to_string(shape_.size()));
  std::int64_t n = 1;
  for (int d : shape_) {
    if (d <= 0) throw ShapeError("tensor dims must be positive");
    n *= d;
  }
  data_.assign(static_cast<std::size_t>(n), 0.0);
}

Tensor Tensor::zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(std::vector<int> shape, double value) {
  Tensor t(std::move(shape));
  std::fill(t.data_.begin(), t.data_.end(), value);
  return t;
}

Tensor Tensor::scalar(double value) {
  Tensor t({1});
  t.data_[0] = value;
  return t;
}

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

double Tensor::min_value() const {
  double m = std::numeric_limits<double>::infinity();
  for (double v : data_) m = std::min(m, v);
  return m;
}

double Tensor::max_value() const {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : data_) m = std::max(m, v);
  return m;
}

double Tensor::abs_mean() const {
  if (data_.empty()) return 0.0;
  double s = 0.0;
  for (double v : data_) s += std::abs(v);
  return s / static_cast<double>(data_.size());
}

Tensor Tensor::reshaped(std::vector<int> shape) const {
  Tensor t(std::move(shape));
  if (t.size() != size())
    throw ShapeError("reshape size mismatch: " + shape_str() + " -> " + t.shape_str());
  t.data_ = data_;
  return t;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) os << ", ";
    os << shape_[i];
  }
  os << ')';
  return os.str();
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(what) + ": shape mismatch " + a.shape_str() + " vs " +
                     b.shape_str());
}

}  // namespace madm
