// Copyright (c) 2026 MADM Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "madm/tensor.hpp"
#include "madm/types.hpp"

namespace madm {

/// Named learnable tensor with gradient and AdamW slots.
struct Param {
  Tensor value;
  Tensor grad;
  Tensor adam_m;
  Tensor adam_v;
  bool trainable = true;

  void zero_grad();
  void ensure_slots();
};

/// Ordered name -> Param map. Ordering is part of the determinism contract:
/// every traversal (updates, EMA, hashing, checkpoints) walks names in
/// lexicographic order.
class ParamStore {
 public:
  Param& add(const std::string& name, Tensor init, bool trainable = true);
  Param& at(const std::string& name);
  const Param& at(const std::string& name) const;
  bool has(const std::string& name) const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }
  std::size_t size() const { return params_.size(); }

  std::int64_t num_scalars() const;
  void zero_grads();
  /// FNV-1a over names and raw value bytes; detects any parameter mutation.
  std::uint64_t content_hash() const;
  /// Copies values elementwise from a shape-congruent store.
  void copy_values_from(const ParamStore& other);

 private:
  std::map<std::string, Param> params_;
};

namespace autodiff {

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
  Tensor value;
  Tensor grad;  // allocated on first backward touch
  bool requires_grad = false;
  Param* param = nullptr;  // leaf binding, grads accumulate here too
  std::vector<NodePtr> inputs;
  std::function<void(Node&)> backprop;

  Tensor& grad_buf();
};

/// Handle to a node in the expression graph.
class Var {
 public:
  Var() = default;
  explicit Var(NodePtr n) : node_(std::move(n)) {}
  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  double scalar() const;
  const NodePtr& node() const { return node_; }

 private:
  NodePtr node_;
};

/// Leaf without gradient.
Var constant(Tensor v);
/// Leaf bound to a parameter; backward accumulates into p.grad.
Var weight(Param& p);
/// weight(p) when with_grad, otherwise a constant copy of p.value.
Var param_leaf(Param& p, bool with_grad);

// --- differentiable operations (feature maps are (C, H, W)) ---

/// 2-D convolution; w is (O, C, kh, kw), optional bias (O).
Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad);
Var silu(const Var& x);
Var add(const Var& a, const Var& b);
Var mul_scalar(const Var& x, double s);
/// Adds a length-C vector to every spatial position of (C, H, W).
Var add_channel_bias(const Var& x, const Var& bias);
/// (m, n) matrix times length-n vector.
Var matvec(const Var& w, const Var& v);
Var concat_channels(const std::vector<Var>& xs);
Var upsample_nearest2(const Var& x);
/// Bilinear resize with half-pixel centers.
Var resize_bilinear(const Var& x, int oh, int ow);
/// Non-overlapping k x k average pooling.
Var avg_pool(const Var& x, int k);

/// Mean per-pixel cross-entropy of logits (K, H, W) against labels,
/// skipping ignored pixels; 0 if every pixel is ignored.
Var softmax_cross_entropy(const Var& logits, const LabelMap& labels);

/// Mean absolute difference over channels and masked spatial positions.
/// mask has h*w entries (1 = supervised); 0 if the mask is empty.
Var l1_masked_mean(const Var& x, const Tensor& target, const std::vector<std::uint8_t>& mask);
/// Unmasked mean absolute difference.
Var l1_mean(const Var& x, const Tensor& target);

/// Scalar combination sum_i coeffs[i] * xs[i] (each x scalar).
Var weighted_sum(const std::vector<Var>& xs, const std::vector<double>& coeffs);

/// Reverse-mode sweep from a scalar root.
void backward(const Var& root);

}  // namespace autodiff

/// Decoupled weight-decay adaptive-moment update over every trainable param.
struct AdamW {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  long long step_count = 0;

  void step(ParamStore& params);
};

}  // namespace madm
