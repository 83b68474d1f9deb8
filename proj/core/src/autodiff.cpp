// Copyright (c) 2026 MADM Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
#include "madm/autodiff.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace madm {

void Param::zero_grad() {
  if (grad.same_shape(value)) {
    std::fill(grad.data(), grad.data() + grad.size(), 0.0);
  } else {
    grad = Tensor::zeros(value.shape());
  }
}

void Param::ensure_slots() {
  if (!adam_m.same_shape(value)) adam_m = Tensor::zeros(value.shape());
  if (!adam_v.same_shape(value)) adam_v = Tensor::zeros(value.shape());
  if (!grad.same_shape(value)) grad = Tensor::zeros(value.shape());
}

Param& ParamStore::add(const std::string& name, Tensor init, bool trainable) {
  auto [it, inserted] = params_.try_emplace(name);
  if (!inserted) throw ValueError("duplicate parameter name: " + name);
  it->second.value = std::move(init);
  it->second.trainable = trainable;
  it->second.ensure_slots();
  return it->second;
}

Param& ParamStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ValueError("unknown parameter: " + name);
  return it->second;
}

const Param& ParamStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ValueError("unknown parameter: " + name);
  return it->second;
}

bool ParamStore::has(const std::string& name) const { return params_.count(name) != 0; }

std::int64_t ParamStore::num_scalars() const {
  std::int64_t n = 0;
  for (const auto& [name, p] : params_) n += p.value.size();
  return n;
}

void ParamStore::zero_grads() {
  for (auto& [name, p] : params_) p.zero_grad();
}

std::uint64_t ParamStore::content_hash() const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* data, std::size_t n) {
    const unsigned char* b = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  };
  for (const auto& [name, p] : params_) {
    mix(name.data(), name.size());
    mix(p.value.data(), static_cast<std::size_t>(p.value.size()) * sizeof(double));
  }
  return h;
}

void ParamStore::copy_values_from(const ParamStore& other) {
  if (other.params_.size() != params_.size())
    throw ShapeError("param store size mismatch in copy_values_from");
  auto it = params_.begin();
  auto jt = other.params_.begin();
  for (; it != params_.end(); ++it, ++jt) {
    if (it->first != jt->first || !it->second.value.same_shape(jt->second.value))
      throw ShapeError("param store mismatch at " + it->first);
    it->second.value = jt->second.value;
  }
}

namespace autodiff {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ColMat = Eigen::MatrixXd;
using RowMap = Eigen::Map<RowMat>;
using CRowMap = Eigen::Map<const RowMat>;

bool any_grad(const std::vector<Var>& xs) {
  for (const Var& x : xs)
    if (x.node()->requires_grad) return true;
  return false;
}

NodePtr make_node(Tensor value, std::vector<Var> inputs) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->inputs.reserve(inputs.size());
  bool rg = false;
  for (Var& v : inputs) {
    rg = rg || v.node()->requires_grad;
    n->inputs.push_back(v.node());
  }
  n->requires_grad = rg;
  return n;
}

void im2col(const Tensor& x, int kh, int kw, int stride, int pad, int ho, int wo, ColMat& cols) {
  const int c_in = x.dim(0), h = x.dim(1), w = x.dim(2);
  cols.resize(static_cast<Eigen::Index>(c_in) * kh * kw, static_cast<Eigen::Index>(ho) * wo);
  const double* xd = x.data();
  for (int oy = 0; oy < ho; ++oy) {
    for (int ox = 0; ox < wo; ++ox) {
      double* col = cols.col(static_cast<Eigen::Index>(oy) * wo + ox).data();
      int r = 0;
      for (int c = 0; c < c_in; ++c) {
        const double* xc = xd + static_cast<std::size_t>(c) * h * w;
        for (int ky = 0; ky < kh; ++ky) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) {
            for (int kx = 0; kx < kw; ++kx) col[r++] = 0.0;
            continue;
          }
          const double* xrow = xc + static_cast<std::size_t>(iy) * w;
          for (int kx = 0; kx < kw; ++kx) {
            const int ix = ox * stride - pad + kx;
            col[r++] = (ix < 0 || ix >= w) ? 0.0 : xrow[ix];
          }
        }
      }
    }
  }
}

void col2im(const ColMat& dcols, int c_in, int h, int w, int kh, int kw, int stride, int pad,
            int ho, int wo, Tensor& dx) {
  double* xd = dx.data();
  for (int oy = 0; oy < ho; ++oy) {
    for (int ox = 0; ox < wo; ++ox) {
      const double* col = dcols.col(static_cast<Eigen::Index>(oy) * wo + ox).data();
      int r = 0;
      for (int c = 0; c < c_in; ++c) {
        double* xc = xd + static_cast<std::size_t>(c) * h * w;
        for (int ky = 0; ky < kh; ++ky) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) {
            r += kw;
            continue;
          }
          double* xrow = xc + static_cast<std::size_t>(iy) * w;
          for (int kx = 0; kx < kw; ++kx, ++r) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < w) xrow[ix] += col[r];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor& Node::grad_buf() {
  if (!grad.same_shape(value)) grad = Tensor::zeros(value.shape());
  return grad;
}

double Var::scalar() const {
  if (node_->value.size() != 1) throw ShapeError("scalar() on non-scalar var");
  return node_->value[0];
}

Var constant(Tensor v) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  n->requires_grad = false;
  return Var(n);
}

Var weight(Param& p) {
  auto n = std::make_shared<Node>();
  n->value = p.value;
  n->requires_grad = true;
  n->param = &p;
  return Var(n);
}

Var param_leaf(Param& p, bool with_grad) { return with_grad ? weight(p) : constant(p.value); }

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
  const Tensor& xt = x.value();
  const Tensor& wt = w.value();
  if (xt.rank() != 3 || wt.rank() != 4) throw ShapeError("conv2d expects (C,H,W) and (O,C,kh,kw)");
  const int c_in = xt.dim(0), h = xt.dim(1), wd = xt.dim(2);
  const int c_out = wt.dim(0), kh = wt.dim(2), kw = wt.dim(3);
  if (wt.dim(1) != c_in) throw ShapeError("conv2d channel mismatch");
  const int ho = (h + 2 * pad - kh) / stride + 1;
  const int wo = (wd + 2 * pad - kw) / stride + 1;
  if (ho <= 0 || wo <= 0) throw ShapeError("conv2d output would be empty");

  auto cols = std::make_shared<ColMat>();
  im2col(xt, kh, kw, stride, pad, ho, wo, *cols);

  Tensor out({c_out, ho, wo});
  CRowMap wmat(wt.data(), c_out, static_cast<Eigen::Index>(c_in) * kh * kw);
  RowMap omat(out.data(), c_out, static_cast<Eigen::Index>(ho) * wo);
  omat.noalias() = wmat * (*cols);
  if (b.defined()) {
    const Tensor& bt = b.value();
    for (int o = 0; o < c_out; ++o) omat.row(o).array() += bt[o];
  }

  std::vector<Var> ins = b.defined() ? std::vector<Var>{x, w, b} : std::vector<Var>{x, w};
  NodePtr n = make_node(std::move(out), ins);
  if (n->requires_grad) {
    const bool has_bias = b.defined();
    n->backprop = [cols, stride, pad, c_in, h, wd, kh, kw, ho, wo, c_out,
                   has_bias](Node& node) {
      CRowMap dy(node.grad.data(), c_out, static_cast<Eigen::Index>(ho) * wo);
      Node& xn = *node.inputs[0];
      Node& wn = *node.inputs[1];
      if (wn.requires_grad) {
        RowMap dw(wn.grad_buf().data(), c_out, static_cast<Eigen::Index>(c_in) * kh * kw);
        dw.noalias() += dy * cols->transpose();
      }
      if (has_bias) {
        Node& bn = *node.inputs[2];
        if (bn.requires_grad) {
          Tensor& db = bn.grad_buf();
          for (int o = 0; o < c_out; ++o) db[o] += dy.row(o).sum();
        }
      }
      if (xn.requires_grad) {
        CRowMap wmat(wn.value.data(), c_out, static_cast<Eigen::Index>(c_in) * kh * kw);
        ColMat dcols = wmat.transpose() * dy;
        col2im(dcols, c_in, h, wd, kh, kw, stride, pad, ho, wo, xn.grad_buf());
      }
    };
  }
  return Var(n);
}

Var silu(const Var& x) {
  const Tensor& xt = x.value();
  Tensor out(xt.shape());
  const double* xd = xt.data();
  double* od = out.data();
  const std::int64_t n = xt.size();
  for (std::int64_t i = 0; i < n; ++i) {
    const double s = 1.0 / (1.0 + std::exp(-xd[i]));
    od[i] = xd[i] * s;
  }
  NodePtr node = make_node(std::move(out), {x});
  if (node->requires_grad) {
    node->backprop = [n](Node& nd) {
      Node& xn = *nd.inputs[0];
      if (!xn.requires_grad) return;
      const double* xd2 = xn.value.data();
      const double* g = nd.grad.data();
      double* dx = xn.grad_buf().data();
      for (std::int64_t i = 0; i < n; ++i) {
        const double s = 1.0 / (1.0 + std::exp(-xd2[i]));
        dx[i] += g[i] * s * (1.0 + xd2[i] * (1.0 - s));
      }
    };
  }
  return Var(node);
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor out(a.value().shape());
  const std::int64_t n = out.size();
  const double* ad = a.value().data();
  const double* bd = b.value().data();
  double* od = out.data();
  for (std::int64_t i = 0; i < n; ++i) od[i] = ad[i] + bd[i];
  NodePtr node = make_node(std::move(out), {a, b});
  if (node->requires_grad) {
    node->backprop = [n](Node& nd) {
      const double* g = nd.grad.data();
      for (int k = 0; k < 2; ++k) {
        Node& in = *nd.inputs[k];
        if (!in.requires_grad) continue;
        double* d = in.grad_buf().data();
        for (std::int64_t i = 0; i < n; ++i) d[i] += g[i];
      }
    };
  }
  return Var(node);
}

Var mul_scalar(const Var& x, double s) {
  Tensor out(x.value().shape());
  const std::int64_t n = out.size();
  const double* xd = x.value().data();
  double* od = out.data();
  for (std::int64_t i = 0; i < n; ++i) od[i] = xd[i] * s;
  NodePtr node = make_node(std::move(out), {x});
  if (node->requires_grad) {
    node->backprop = [n, s](Node& nd) {
      Node& in = *nd.inputs[0];
      if (!in.requires_grad) return;
      const double* g = nd.grad.data();
      double* d = in.grad_buf().data();
      for (std::int64_t i = 0; i < n; ++i) d[i] += g[i] * s;
    };
  }
  return Var(node);
}

Var add_channel_bias(const Var& x, const Var& bias) {
  const Tensor& xt = x.value();
  const Tensor& bt = bias.value();
  if (xt.rank() != 3 || bt.rank() != 1 || bt.dim(0) != xt.dim(0))
    throw ShapeError("add_channel_bias expects (C,H,W) and (C)");
  const int c = xt.dim(0);
  const std::int64_t hw = static_cast<std::int64_t>(xt.dim(1)) * xt.dim(2);
  Tensor out(xt.shape());
  for (int ci = 0; ci < c; ++ci) {
    const double bv = bt[ci];
    const double* xd = xt.data() + ci * hw;
    double* od = out.data() + ci * hw;
    for (std::int64_t i = 0; i < hw; ++i) od[i] = xd[i] + bv;
  }
  NodePtr node = make_node(std::move(out), {x, bias});
  if (node->requires_grad) {
    node->backprop = [c, hw](Node& nd) {
      const double* g = nd.grad.data();
      Node& xn = *nd.inputs[0];
      Node& bn = *nd.inputs[1];
      if (xn.requires_grad) {
        double* d = xn.grad_buf().data();
        const std::int64_t n = c * hw;
        for (std::int64_t i = 0; i < n; ++i) d[i] += g[i];
      }
      if (bn.requires_grad) {
        double* d = bn.grad_buf().data();
        for (int ci = 0; ci < c; ++ci) {
          double s = 0.0;
          const double* gc = g + ci * hw;
          for (std::int64_t i = 0; i < hw; ++i) s += gc[i];
          d[ci] += s;
        }
      }
    };
  }
  return Var(node);
}

Var matvec(const Var& w, const Var& v) {
  const Tensor& wt = w.value();
  const Tensor& vt = v.value();
  if (wt.rank() != 2 || vt.rank() != 1 || wt.dim(1) != vt.dim(0))
    throw ShapeError("matvec expects (m,n) and (n)");
  const int m = wt.dim(0), nn = wt.dim(1);
  Tensor out({m});
  CRowMap wm(wt.data(), m, nn);
  Eigen::Map<const Eigen::VectorXd> vv(vt.data(), nn);
  Eigen::Map<Eigen::VectorXd> ov(out.data(), m);
  ov.noalias() = wm * vv;
  NodePtr node = make_node(std::move(out), {w, v});
  if (node->requires_grad) {
    node->backprop = [m, nn](Node& nd) {
      Eigen::Map<const Eigen::VectorXd> g(nd.grad.data(), m);
      Node& wn = *nd.inputs[0];
      Node& vn = *nd.inputs[1];
      if (wn.requires_grad) {
        RowMap dw(wn.grad_buf().data(), m, nn);
        Eigen::Map<const Eigen::VectorXd> vv2(vn.value.data(), nn);
        dw.noalias() += g * vv2.transpose();
      }
      if (vn.requires_grad) {
        CRowMap wm2(wn.value.data(), m, nn);
        Eigen::Map<Eigen::VectorXd> dv(vn.grad_buf().data(), nn);
        dv.noalias() += wm2.transpose() * g;
      }
    };
  }
  return Var(node);
}

Var concat_channels(const std::vector<Var>& xs) {
  if (xs.empty()) throw ShapeError("concat_channels needs inputs");
  const int h = xs[0].value().dim(1), w = xs[0].value().dim(2);
  int c_total = 0;
  for (const Var& x : xs) {
    if (x.value().rank() != 3 || x.value().dim(1) != h || x.value().dim(2) != w)
      throw ShapeError("concat_channels spatial mismatch");
    c_total += x.value().dim(0);
  }
  Tensor out({c_total, h, w});
  std::int64_t off = 0;
  for (const Var& x : xs) {
    const std::int64_t n = x.value().size();
    std::copy(x.value().data(), x.value().data() + n, out.data() + off);
    off += n;
  }
  NodePtr node = make_node(std::move(out), xs);
  if (node->requires_grad) {
    node->backprop = [](Node& nd) {
      std::int64_t off2 = 0;
      for (auto& inp : nd.inputs) {
        const std::int64_t n = inp->value.size();
        if (inp->requires_grad) {
          double* d = inp->grad_buf().data();
          const double* g = nd.grad.data() + off2;
          for (std::int64_t i = 0; i < n; ++i) d[i] += g[i];
        }
        off2 += n;
      }
    };
  }
  return Var(node);
}

Var upsample_nearest2(const Var& x) {
  const Tensor& xt = x.value();
  const int c = xt.dim(0), h = xt.dim(1), w = xt.dim(2);
  Tensor out({c, h * 2, w * 2});
  for (int ci = 0; ci < c; ++ci)
    for (int y = 0; y < h * 2; ++y)
      for (int xx = 0; xx < w * 2; ++xx) out.at(ci, y, xx) = xt.at(ci, y / 2, xx / 2);
  NodePtr node = make_node(std::move(out), {x});
  if (node->requires_grad) {
    node->backprop = [c, h, w](Node& nd) {
      Node& in = *nd.inputs[0];
      if (!in.requires_grad) return;
      Tensor& dx = in.grad_buf();
      for (int ci = 0; ci < c; ++ci)
        for (int y = 0; y < h * 2; ++y)
          for (int xx = 0; xx < w * 2; ++xx) dx.at(ci, y / 2, xx / 2) += nd.grad.at(ci, y, xx);
    };
  }
  return Var(node);
}

Var resize_bilinear(const Var& x, int oh, int ow) {
  const Tensor& xt = x.value();
  const int c = xt.dim(0), h = xt.dim(1), w = xt.dim(2);
  if (oh == h && ow == w) return x;
  // Half-pixel sample centers, clamped at the border.
  struct Lerp {
    int i0, i1;
    double w1;  // weight of i1; weight of i0 is 1-w1
  };
  auto make_axis = [](int in, int out) {
    std::vector<Lerp> v(static_cast<std::size_t>(out));
    const double scale = static_cast<double>(in) / out;
    for (int o = 0; o < out; ++o) {
      double src = (o + 0.5) * scale - 0.5;
      if (src < 0) src = 0;
      if (src > in - 1) src = in - 1;
      int i0 = static_cast<int>(src);
      int i1 = std::min(i0 + 1, in - 1);
      v[static_cast<std::size_t>(o)] = {i0, i1, src - i0};
    }
    return v;
  };
  auto ys = std::make_shared<std::vector<Lerp>>(make_axis(h, oh));
  auto xsv = std::make_shared<std::vector<Lerp>>(make_axis(w, ow));

  Tensor out({c, oh, ow});
  for (int ci = 0; ci < c; ++ci) {
    for (int oy = 0; oy < oh; ++oy) {
      const Lerp& ly = (*ys)[static_cast<std::size_t>(oy)];
      for (int ox = 0; ox < ow; ++ox) {
        const Lerp& lx = (*xsv)[static_cast<std::size_t>(ox)];
        const double v00 = xt.at(ci, ly.i0, lx.i0), v01 = xt.at(ci, ly.i0, lx.i1);
        const double v10 = xt.at(ci, ly.i1, lx.i0), v11 = xt.at(ci, ly.i1, lx.i1);
        const double top = v00 + (v01 - v00) * lx.w1;
        const double bot = v10 + (v11 - v10) * lx.w1;
        out.at(ci, oy, ox) = top + (bot - top) * ly.w1;
      }
    }
  }
  NodePtr node = make_node(std::move(out), {x});
  if (node->requires_grad) {
    node->backprop = [c, oh, ow, ys, xsv](Node& nd) {
      Node& in = *nd.inputs[0];
      if (!in.requires_grad) return;
      Tensor& dx = in.grad_buf();
      for (int ci = 0; ci < c; ++ci) {
        for (int oy = 0; oy < oh; ++oy) {
          const Lerp& ly = (*ys)[static_cast<std::size_t>(oy)];
          for (int ox = 0; ox < ow; ++ox) {
            const Lerp& lx = (*xsv)[static_cast<std::size_t>(ox)];
            const double g = nd.grad.at(ci, oy, ox);
            dx.at(ci, ly.i0, lx.i0) += g * (1 - ly.w1) * (1 - lx.w1);
            dx.at(ci, ly.i0, lx.i1) += g * (1 - ly.w1) * lx.w1;
            dx.at(ci, ly.i1, lx.i0) += g * ly.w1 * (1 - lx.w1);
            dx.at(ci, ly.i1, lx.i1) += g * ly.w1 * lx.w1;
          }
        }
      }
    };
  }
  return Var(node);
}

Var avg_pool(const Var& x, int k) {
  const Tensor& xt = x.value();
  const int c = xt.dim(0), h = xt.dim(1), w = xt.dim(2);
  if (h % k != 0 || w % k != 0) throw ShapeError("avg_pool requires dims divisible by k");
  const int oh = h / k, ow = w / k;
  const double inv = 1.0 / (k * k);
  Tensor out({c, oh, ow});
  for (int ci = 0; ci < c; ++ci)
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        double s = 0.0;
        for (int dy = 0; dy < k; ++dy)
          for (int dx = 0; dx < k; ++dx) s += xt.at(ci, oy * k + dy, ox * k + dx);
        out.at(ci, oy, ox) = s * inv;
      }
  NodePtr node = make_node(std::move(out), {x});
  if (node->requires_grad) {
    node->backprop = [c, oh, ow, k, inv](Node& nd) {
      Node& in = *nd.inputs[0];
      if (!in.requires_grad) return;
      Tensor& dx = in.grad_buf();
      for (int ci = 0; ci < c; ++ci)
        for (int oy = 0; oy < oh; ++oy)
          for (int ox = 0; ox < ow; ++ox) {
            const double g = nd.grad.at(ci, oy, ox) * inv;
            for (int dy = 0; dy < k; ++dy)
              for (int dxx = 0; dxx < k; ++dxx) dx.at(ci, oy * k + dy, ox * k + dxx) += g;
          }
    };
  }
  return Var(node);
}

Var softmax_cross_entropy(const Var& logits, const LabelMap& labels) {
  const Tensor& lt = logits.value();
  if (lt.rank() != 3) throw ShapeError("cross entropy expects (K, H, W) logits");
  const int k = lt.dim(0), h = lt.dim(1), w = lt.dim(2);
  if (h != labels.h || w != labels.w)
    throw ShapeError("cross entropy logits/labels spatial mismatch");
  if (labels.num_classes > k) throw ShapeError("labels reference more classes than logits have");

  const std::int64_t hw = static_cast<std::int64_t>(h) * w;
  std::int64_t valid = 0;
  double loss = 0.0;
  const double* ld = lt.data();
  for (std::int64_t p = 0; p < hw; ++p) {
    const std::int32_t y = labels.classes[static_cast<std::size_t>(p)];
    if (y == labels.ignore_value) continue;
    double m = ld[p];
    for (int c = 1; c < k; ++c) m = std::max(m, ld[c * hw + p]);
    double se = 0.0;
    for (int c = 0; c < k; ++c) se += std::exp(ld[c * hw + p] - m);
    loss += m + std::log(se) - ld[static_cast<std::int64_t>(y) * hw + p];
    ++valid;
  }
  Tensor out = Tensor::scalar(valid > 0 ? loss / static_cast<double>(valid) : 0.0);
  NodePtr node = make_node(std::move(out), {logits});
  if (node->requires_grad && valid > 0) {
    LabelMap lab = labels;  // small copy; closure owns the supervision
    node->backprop = [k, hw, valid, lab = std::move(lab)](Node& nd) {
      Node& in = *nd.inputs[0];
      if (!in.requires_grad) return;
      const double g = nd.grad[0] / static_cast<double>(valid);
      const double* ld2 = in.value.data();
      double* dx = in.grad_buf().data();
      std::vector<double> prob(static_cast<std::size_t>(k));
      for (std::int64_t p = 0; p < hw; ++p) {
        const std::int32_t y = lab.classes[static_cast<std::size_t>(p)];
        if (y == lab.ignore_value) continue;
        double m = ld2[p];
        for (int c = 1; c < k; ++c) m = std::max(m, ld2[c * hw + p]);
        double se = 0.0;
        for (int c = 0; c < k; ++c) {
          prob[static_cast<std::size_t>(c)] = std::exp(ld2[c * hw + p] - m);
          se += prob[static_cast<std::size_t>(c)];
        }
        for (int c = 0; c < k; ++c) {
          const double soft = prob[static_cast<std::size_t>(c)] / se;
          dx[c * hw + p] += g * (soft - (c == y ? 1.0 : 0.0));
        }
      }
    };
  }
  return Var(node);
}

Var l1_masked_mean(const Var& x, const Tensor& target, const std::vector<std::uint8_t>& mask) {
  const Tensor& xt = x.value();
  require_same_shape(xt, target, "l1_masked_mean");
  if (xt.rank() != 3) throw ShapeError("l1_masked_mean expects (C, h, w)");
  const int c = xt.dim(0);
  const std::int64_t hw = static_cast<std::int64_t>(xt.dim(1)) * xt.dim(2);
  if (static_cast<std::int64_t>(mask.size()) != hw)
    throw ShapeError("l1_masked_mean mask size mismatch");
  std::int64_t cnt = 0;
  for (std::uint8_t m : mask) cnt += m ? 1 : 0;
  double loss = 0.0;
  if (cnt > 0) {
    const double* xd = xt.data();
    const double* td = target.data();
    for (int ci = 0; ci < c; ++ci)
      for (std::int64_t p = 0; p < hw; ++p)
        if (mask[static_cast<std::size_t>(p)]) loss += std::abs(xd[ci * hw + p] - td[ci * hw + p]);
    loss /= static_cast<double>(cnt * c);
  }
  NodePtr node = make_node(Tensor::scalar(loss), {x});
  if (node->requires_grad && cnt > 0) {
    auto tgt = std::make_shared<Tensor>(target);
    auto msk = std::make_shared<std::vector<std::uint8_t>>(mask);
    const double inv = 1.0 / static_cast<double>(cnt * c);
    node->backprop = [c, hw, inv, tgt, msk](Node& nd) {
      Node& in = *nd.inputs[0];
      if (!in.requires_grad) return;
      const double g = nd.grad[0] * inv;
      const double* xd = in.value.data();
      const double* td = tgt->data();
      double* dx = in.grad_buf().data();
      for (int ci = 0; ci < c; ++ci)
        for (std::int64_t p = 0; p < hw; ++p) {
          if (!(*msk)[static_cast<std::size_t>(p)]) continue;
          const double d = xd[ci * hw + p] - td[ci * hw + p];
          dx[ci * hw + p] += d > 0 ? g : (d < 0 ? -g : 0.0);
        }
    };
  }
  return Var(node);
}

Var l1_mean(const Var& x, const Tensor& target) {
  const Tensor& xt = x.value();
  require_same_shape(xt, target, "l1_mean");
  const std::int64_t hw = static_cast<std::int64_t>(xt.dim(xt.rank() - 2)) * xt.dim(xt.rank() - 1);
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(hw), 1);
  return l1_masked_mean(x, target, mask);
}

Var weighted_sum(const std::vector<Var>& xs, const std::vector<double>& coeffs) {
  if (xs.empty() || xs.size() != coeffs.size()) throw ShapeError("weighted_sum arity mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (xs[i].value().size() != 1) throw ShapeError("weighted_sum expects scalars");
    s += coeffs[i] * xs[i].value()[0];
  }
  NodePtr node = make_node(Tensor::scalar(s), xs);
  if (node->requires_grad) {
    auto cs = std::make_shared<std::vector<double>>(coeffs);
    node->backprop = [cs](Node& nd) {
      for (std::size_t i = 0; i < nd.inputs.size(); ++i) {
        Node& in = *nd.inputs[i];
        if (in.requires_grad) in.grad_buf()[0] += nd.grad[0] * (*cs)[i];
      }
    };
  }
  return Var(node);
}

void backward(const Var& root) {
  if (!root.defined() || root.value().size() != 1)
    throw ShapeError("backward requires a defined scalar root");
  // Iterative post-order: children first, then the node itself.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->inputs.size()) {
      Node* child = node->inputs[idx].get();
      ++idx;
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root.node()->grad_buf()[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (!n->requires_grad) continue;
    if (n->backprop && n->grad.same_shape(n->value)) n->backprop(*n);
    if (n->param) {
      // Leaf: push accumulated gradient into the parameter slot.
      if (n->grad.same_shape(n->value)) {
        double* pg = n->param->grad.data();
        const double* g = n->grad.data();
        for (std::int64_t i = 0; i < n->grad.size(); ++i) pg[i] += g[i];
      }
    }
  }
}

}  // namespace autodiff

void AdamW::step(ParamStore& params) {
  ++step_count;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
  for (auto& [name, p] : params) {
    if (!p.trainable) continue;
    p.ensure_slots();
    double* v = p.value.data();
    double* g = p.grad.data();
    double* m = p.adam_m.data();
    double* vv = p.adam_v.data();
    const std::int64_t n = p.value.size();
    for (std::int64_t i = 0; i < n; ++i) {
      v[i] -= lr * weight_decay * v[i];
      m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
      vv[i] = beta2 * vv[i] + (1.0 - beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = vv[i] / bc2;
      v[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

}  // namespace madm
