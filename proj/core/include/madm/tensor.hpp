// Copyright (c) 2026 MADM Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace madm {

/// Error root for the toolkit. Subclasses distinguish the usual failure
/// modes so callers can report them precisely.
class MadmError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class ShapeError : public MadmError {
 public:
  using MadmError::MadmError;
};
class ValueError : public MadmError {
 public:
  using MadmError::MadmError;
};
class CodecError : public MadmError {
 public:
  using MadmError::MadmError;
};
class ConfigError : public MadmError {
 public:
  using MadmError::MadmError;
};
class IoError : public MadmError {
 public:
  using MadmError::MadmError;
};

/// Dense row-major double tensor (rank <= 4). This is not a general tensor
/// library; it carries exactly the shapes the pipeline needs. Feature maps
/// are stored channels-first as (C, H, W).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);

  static Tensor zeros(std::vector<int> shape);
  static Tensor full(std::vector<int> shape, double value);
  static Tensor scalar(double value);

  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  const std::vector<int>& shape() const { return shape_; }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  double operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  // Rank-specific element access; index arithmetic matches row-major layout.
  double& at(int a) { return data_[static_cast<std::size_t>(a)]; }
  double at(int a) const { return data_[static_cast<std::size_t>(a)]; }
  double& at(int a, int b) { return data_[static_cast<std::size_t>(a) * shape_[1] + b]; }
  double at(int a, int b) const { return data_[static_cast<std::size_t>(a) * shape_[1] + b]; }
  double& at(int a, int b, int c) {
    return data_[(static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + c];
  }
  double at(int a, int b, int c) const {
    return data_[(static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + c];
  }
  double& at(int a, int b, int c, int d) {
    return data_[((static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + c) * shape_[3] + d];
  }
  double at(int a, int b, int c, int d) const {
    return data_[((static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + c) * shape_[3] + d];
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;
  double min_value() const;
  double max_value() const;
  double abs_mean() const;

  /// Reinterpret with a new shape of identical total size.
  Tensor reshaped(std::vector<int> shape) const;

  std::string shape_str() const;

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

/// Throws ShapeError unless the two tensors have identical shapes.
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

}  // namespace madm
