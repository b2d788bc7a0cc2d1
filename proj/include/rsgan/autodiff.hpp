#pragma once

// Reverse-mode automatic differentiation over batched tensors.
//
// A Var is a handle to a node in a dynamically built graph. Every op records
// its parents and a backward closure when grad mode is on and at least one
// parent is tracked (a parameter, or itself the result of a tracked op).
// backward() only propagates into nodes that lie on a path to one of the
// requested targets, so a pass that asks for discriminator weights never
// touches the generator's subgraph.

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "rsgan/tensor.hpp"

namespace rsgan::ad {

template <typename T>
struct Node {
  Tensor<T> value;
  Buffer<T> grad;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;
  std::string name;
  bool is_param = false;
  bool needs_grad = false;

  bool tracked() const { return is_param || !parents.empty(); }
};

inline bool& grad_mode() {
  thread_local bool enabled = true;
  return enabled;
}

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard() : prev_(grad_mode()) { grad_mode() = false; }
  ~NoGradGuard() { grad_mode() = prev_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node<T>> n) : node_(std::move(n)) {}

  const Tensor<T>& value() const { return node_->value; }
  Tensor<T>& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape; }
  std::size_t size() const { return node_->value.size(); }
  Node<T>& node() const { return *node_; }
  const std::shared_ptr<Node<T>>& ptr() const { return node_; }
  bool defined() const { return static_cast<bool>(node_); }

  /// Scalar value of a one-element tensor.
  T item() const { return node_->value.data.at(0); }
  /// Gradient left by the most recent backward pass (empty if none reached it).
  const Buffer<T>& grad() const { return node_->grad; }

 private:
  std::shared_ptr<Node<T>> node_;
};

template <typename T>
Var<T> constant(Tensor<T> t) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(t);
  return Var<T>(std::move(n));
}

template <typename T>
Var<T> parameter(Tensor<T> t, std::string name) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(t);
  n->name = std::move(name);
  n->is_param = true;
  return Var<T>(std::move(n));
}

template <typename T>
Var<T> make_op(Tensor<T> value, std::vector<Var<T>> parents, std::function<void(Node<T>&)> bw) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  if (grad_mode()) {
    const bool any = std::any_of(parents.begin(), parents.end(),
                                 [](const Var<T>& p) { return p.node().tracked(); });
    if (any) {
      n->parents.reserve(parents.size());
      for (auto& p : parents) n->parents.push_back(p.ptr());
      n->backward_fn = std::move(bw);
    }
  }
  return Var<T>(std::move(n));
}

/// Runs one reverse pass from `output`, seeding d(output)/d(output) = seed
/// (broadcast over all output elements). Afterwards each target's grad() holds
/// d(seed . output)/d(target). Targets unreachable from `output` get zeros.
template <typename T>
void backward(const Var<T>& output, std::span<const Var<T>> targets, T seed = T(1)) {
  std::unordered_set<const Node<T>*> wanted;
  for (const auto& t : targets) wanted.insert(t.ptr().get());

  // Iterative post-order DFS gives parents before children.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> visited;
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.emplace_back(output.ptr().get(), 0);
  visited.insert(output.ptr().get());
  while (!stack.empty()) {
    auto& [n, idx] = stack.back();
    if (idx < n->parents.size()) {
      Node<T>* p = n->parents[idx++].get();
      if (visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  for (Node<T>* n : order) {
    bool need = wanted.count(n) > 0;
    for (const auto& p : n->parents) need = need || p->needs_grad;
    n->needs_grad = need;
    if (need) n->grad.assign(n->value.size(), T(0));
  }
  for (const auto& t : targets) {
    if (!t.node().needs_grad) t.node().grad.assign(t.size(), T(0));
  }
  if (!output.node().needs_grad) return;

  std::fill(output.node().grad.begin(), output.node().grad.end(), seed);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->needs_grad && n->backward_fn) n->backward_fn(*n);
  }
  for (Node<T>* n : order) {
    n->needs_grad = false;
    if (!n->is_param && !wanted.count(n)) Buffer<T>().swap(n->grad);
  }
}

template <typename T>
void backward(const Var<T>& output, const std::vector<Var<T>>& targets, T seed = T(1)) {
  backward(output, std::span<const Var<T>>(targets), seed);
}

namespace detail {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapMat = Eigen::Map<const RowMat<T>>;

template <typename T>
inline void accumulate(Buffer<T>& dst, std::span<const T> src) {
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
}

struct ConvGeom {
  int channels, height, width, kernel, stride, pad, out_h, out_w;
  int col_rows() const { return channels * kernel * kernel; }
  int col_cols() const { return out_h * out_w; }
};

/// Unfolds one C x H x W image into a (C*k*k) x (Ho*Wo) patch matrix.
template <typename T>
void im2col(const T* img, const ConvGeom& g, T* col) {
  const int cols = g.col_cols();
  for (int c = 0; c < g.channels; ++c)
    for (int ki = 0; ki < g.kernel; ++ki)
      for (int kj = 0; kj < g.kernel; ++kj) {
        T* dst = col + static_cast<std::size_t>((c * g.kernel + ki) * g.kernel + kj) * cols;
        const T* src = img + static_cast<std::size_t>(c) * g.height * g.width;
        for (int oh = 0; oh < g.out_h; ++oh) {
          const int ih = oh * g.stride - g.pad + ki;
          T* drow = dst + oh * g.out_w;
          if (ih < 0 || ih >= g.height) {
            std::fill(drow, drow + g.out_w, T(0));
            continue;
          }
          for (int ow = 0; ow < g.out_w; ++ow) {
            const int iw = ow * g.stride - g.pad + kj;
            drow[ow] = (iw >= 0 && iw < g.width) ? src[ih * g.width + iw] : T(0);
          }
        }
      }
}

/// Adjoint of im2col: scatters a patch matrix back onto the image (accumulating).
template <typename T>
void col2im(const T* col, const ConvGeom& g, T* img) {
  const int cols = g.col_cols();
  for (int c = 0; c < g.channels; ++c)
    for (int ki = 0; ki < g.kernel; ++ki)
      for (int kj = 0; kj < g.kernel; ++kj) {
        const T* src = col + static_cast<std::size_t>((c * g.kernel + ki) * g.kernel + kj) * cols;
        T* dst = img + static_cast<std::size_t>(c) * g.height * g.width;
        for (int oh = 0; oh < g.out_h; ++oh) {
          const int ih = oh * g.stride - g.pad + ki;
          if (ih < 0 || ih >= g.height) continue;
          for (int ow = 0; ow < g.out_w; ++ow) {
            const int iw = ow * g.stride - g.pad + kj;
            if (iw >= 0 && iw < g.width) dst[ih * g.width + iw] += src[oh * g.out_w + ow];
          }
        }
      }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Dense layers

/// y[N,O] = x[N,F] * W[O,F]^T + b[O]
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
  using namespace detail;
  if (x.value().rank() != 2 || w.value().rank() != 2 || x.shape()[1] != w.shape()[1] ||
      b.size() != static_cast<std::size_t>(w.shape()[0]))
    throw ShapeError("linear: incompatible shapes x" + shape_str(x.shape()) + " w" +
                     shape_str(w.shape()));
  const int n = x.shape()[0], f = x.shape()[1], o = w.shape()[0];
  Tensor<T> y({n, o});
  MapMat<T> ym(y.data.data(), n, o);
  CMapMat<T> xm(x.value().data.data(), n, f);
  CMapMat<T> wm(w.value().data.data(), o, f);
  ym.noalias() = xm * wm.transpose();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < o; ++j) ym(i, j) += b.value()[static_cast<std::size_t>(j)];
  return make_op<T>(std::move(y), {x, w, b}, [n, f, o](Node<T>& self) {
    CMapMat<T> gy(self.grad.data(), n, o);
    auto& px = *self.parents[0];
    auto& pw = *self.parents[1];
    auto& pb = *self.parents[2];
    if (px.needs_grad) {
      MapMat<T> gx(px.grad.data(), n, f);
      gx.noalias() += gy * CMapMat<T>(pw.value.data.data(), o, f);
    }
    if (pw.needs_grad) {
      MapMat<T> gw(pw.grad.data(), o, f);
      gw.noalias() += gy.transpose() * CMapMat<T>(px.value.data.data(), n, f);
    }
    if (pb.needs_grad)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < o; ++j) pb.grad[static_cast<std::size_t>(j)] += gy(i, j);
  });
}

/// 2-D convolution. x[N,C,H,W], w[O,C,k,k], b[O] -> y[N,O,Ho,Wo].
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride, int pad) {
  using namespace detail;
  const auto& xs = x.shape();
  const auto& ws = w.shape();
  if (xs.size() != 4 || ws.size() != 4 || xs[1] != ws[1] || ws[2] != ws[3])
    throw ShapeError("conv2d: incompatible shapes x" + shape_str(xs) + " w" + shape_str(ws));
  ConvGeom g{xs[1], xs[2], xs[3], ws[2], stride, pad, 0, 0};
  g.out_h = (g.height + 2 * pad - g.kernel) / stride + 1;
  g.out_w = (g.width + 2 * pad - g.kernel) / stride + 1;
  const int n = xs[0], o = ws[0];
  const std::size_t in_stride = static_cast<std::size_t>(g.channels) * g.height * g.width;
  const std::size_t out_stride = static_cast<std::size_t>(o) * g.col_cols();
  Tensor<T> y({n, o, g.out_h, g.out_w});
  Buffer<T> col(static_cast<std::size_t>(g.col_rows()) * g.col_cols());
  CMapMat<T> wm(w.value().data.data(), o, g.col_rows());
  for (int s = 0; s < n; ++s) {
    im2col(x.value().data.data() + s * in_stride, g, col.data());
    MapMat<T> ym(y.data.data() + s * out_stride, o, g.col_cols());
    ym.noalias() = wm * CMapMat<T>(col.data(), g.col_rows(), g.col_cols());
    for (int c = 0; c < o; ++c) ym.row(c).array() += b.value()[static_cast<std::size_t>(c)];
  }
  return make_op<T>(std::move(y), {x, w, b}, [g, n, o, in_stride, out_stride](Node<T>& self) {
    auto& px = *self.parents[0];
    auto& pw = *self.parents[1];
    auto& pb = *self.parents[2];
    Buffer<T> col(static_cast<std::size_t>(g.col_rows()) * g.col_cols());
    CMapMat<T> wm(pw.value.data.data(), o, g.col_rows());
    for (int s = 0; s < n; ++s) {
      CMapMat<T> gy(self.grad.data() + s * out_stride, o, g.col_cols());
      if (pw.needs_grad) {
        im2col(px.value.data.data() + s * in_stride, g, col.data());
        MapMat<T> gw(pw.grad.data(), o, g.col_rows());
        gw.noalias() += gy * CMapMat<T>(col.data(), g.col_rows(), g.col_cols()).transpose();
      }
      if (pb.needs_grad)
        for (int c = 0; c < o; ++c) pb.grad[static_cast<std::size_t>(c)] += gy.row(c).sum();
      if (px.needs_grad) {
        MapMat<T> gcol(col.data(), g.col_rows(), g.col_cols());
        gcol.noalias() = wm.transpose() * gy;
        col2im(col.data(), g, px.grad.data() + s * in_stride);
      }
    }
  });
}

/// Transposed convolution (the adjoint of conv2d in x).
/// x[N,C,H,W], w[C,O,k,k], b[O] -> y[N,O,(H-1)s-2p+k,(W-1)s-2p+k].
template <typename T>
Var<T> conv_transpose2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride, int pad) {
  using namespace detail;
  const auto& xs = x.shape();
  const auto& ws = w.shape();
  if (xs.size() != 4 || ws.size() != 4 || xs[1] != ws[0] || ws[2] != ws[3])
    throw ShapeError("conv_transpose2d: incompatible shapes x" + shape_str(xs) + " w" +
                     shape_str(ws));
  const int n = xs[0], cin = xs[1], o = ws[1], k = ws[2];
  // Geometry of the equivalent forward convolution mapping y -> x.
  ConvGeom g{o, (xs[2] - 1) * stride - 2 * pad + k, (xs[3] - 1) * stride - 2 * pad + k, k,
             stride, pad, xs[2], xs[3]};
  const std::size_t in_stride = static_cast<std::size_t>(cin) * g.col_cols();
  const std::size_t out_stride = static_cast<std::size_t>(o) * g.height * g.width;
  Tensor<T> y({n, o, g.height, g.width});
  Buffer<T> col(static_cast<std::size_t>(g.col_rows()) * g.col_cols());
  CMapMat<T> wm(w.value().data.data(), cin, g.col_rows());
  for (int s = 0; s < n; ++s) {
    MapMat<T> cm(col.data(), g.col_rows(), g.col_cols());
    cm.noalias() = wm.transpose() * CMapMat<T>(x.value().data.data() + s * in_stride, cin,
                                               g.col_cols());
    T* ys = y.data.data() + s * out_stride;
    col2im(col.data(), g, ys);
    const std::size_t plane = static_cast<std::size_t>(g.height) * g.width;
    for (int c = 0; c < o; ++c) {
      const T bc = b.value()[static_cast<std::size_t>(c)];
      for (std::size_t i = 0; i < plane; ++i) ys[c * plane + i] += bc;
    }
  }
  return make_op<T>(std::move(y), {x, w, b}, [g, n, cin, o, in_stride, out_stride](Node<T>& self) {
    auto& px = *self.parents[0];
    auto& pw = *self.parents[1];
    auto& pb = *self.parents[2];
    Buffer<T> col(static_cast<std::size_t>(g.col_rows()) * g.col_cols());
    const std::size_t plane = static_cast<std::size_t>(g.height) * g.width;
    for (int s = 0; s < n; ++s) {
      const T* gy = self.grad.data() + s * out_stride;
      if (pb.needs_grad)
        for (int c = 0; c < o; ++c) {
          T acc = 0;
          for (std::size_t i = 0; i < plane; ++i) acc += gy[c * plane + i];
          pb.grad[static_cast<std::size_t>(c)] += acc;
        }
      if (!px.needs_grad && !pw.needs_grad) continue;
      im2col(gy, g, col.data());
      CMapMat<T> gcol(col.data(), g.col_rows(), g.col_cols());
      if (px.needs_grad) {
        MapMat<T> gx(px.grad.data() + s * in_stride, cin, g.col_cols());
        gx.noalias() += CMapMat<T>(pw.value.data.data(), cin, g.col_rows()) * gcol;
      }
      if (pw.needs_grad) {
        MapMat<T> gw(pw.grad.data(), cin, g.col_rows());
        gw.noalias() +=
            CMapMat<T>(px.value.data.data() + s * in_stride, cin, g.col_cols()) * gcol.transpose();
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Elementwise

namespace detail {

template <typename T, typename Fwd, typename Deriv>
Var<T> unary(const Var<T>& x, Fwd fwd, Deriv deriv) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y.data[i] = fwd(x.value().data[i]);
  return make_op<T>(std::move(y), {x}, [deriv](Node<T>& self) {
    auto& px = *self.parents[0];
    if (!px.needs_grad) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      px.grad[i] += self.grad[i] * deriv(px.value.data[i], self.value.data[i]);
  });
}

}  // namespace detail

template <typename T>
Var<T> leaky_relu(const Var<T>& x, T slope = T(0.2)) {
  return detail::unary(
      x, [slope](T v) { return v > 0 ? v : slope * v; },
      [slope](T v, T) { return v > 0 ? T(1) : slope; });
}

template <typename T>
Var<T> tanh(const Var<T>& x) {
  return detail::unary(
      x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  return detail::unary(
      x, [](T v) { return v >= 0 ? T(1) / (T(1) + std::exp(-v)) : std::exp(v) / (T(1) + std::exp(v)); },
      [](T, T y) { return y * (T(1) - y); });
}

/// bound * tanh(x / bound): identity near zero, saturating at +-bound.
template <typename T>
Var<T> soft_clamp(const Var<T>& x, T bound) {
  return detail::unary(
      x, [bound](T v) { return bound * std::tanh(v / bound); },
      [bound](T, T y) { return T(1) - (y / bound) * (y / bound); });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_shape(b.shape(), a.shape(), "add");
  Tensor<T> y(a.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y.data[i] = a.value().data[i] + b.value().data[i];
  return make_op<T>(std::move(y), {a, b}, [](Node<T>& self) {
    for (int k = 0; k < 2; ++k) {
      auto& p = *self.parents[static_cast<std::size_t>(k)];
      if (p.needs_grad) detail::accumulate<T>(p.grad, self.grad);
    }
  });
}

/// Linear combination of equally shaped tensors: sum_i coeff_i * x_i.
template <typename T>
Var<T> weighted_sum(const std::vector<std::pair<Var<T>, T>>& terms) {
  if (terms.empty()) throw ShapeError("weighted_sum: no terms");
  Tensor<T> y(terms[0].first.shape());
  std::vector<Var<T>> parents;
  std::vector<T> coeffs;
  for (const auto& [v, c] : terms) {
    require_shape(v.shape(), y.shape, "weighted_sum");
    for (std::size_t i = 0; i < y.size(); ++i) y.data[i] += c * v.value().data[i];
    parents.push_back(v);
    coeffs.push_back(c);
  }
  return make_op<T>(std::move(y), std::move(parents), [coeffs](Node<T>& self) {
    for (std::size_t k = 0; k < coeffs.size(); ++k) {
      auto& p = *self.parents[k];
      if (!p.needs_grad) continue;
      for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += coeffs[k] * self.grad[i];
    }
  });
}

// ---------------------------------------------------------------------------
// Shape manipulation

template <typename T>
Var<T> reshape(const Var<T>& x, Shape shape) {
  if (shape_numel(shape) != x.size())
    throw ShapeError("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape));
  Tensor<T> y(std::move(shape), x.value().data);
  return make_op<T>(std::move(y), {x}, [](Node<T>& self) {
    auto& px = *self.parents[0];
    if (px.needs_grad) detail::accumulate<T>(px.grad, self.grad);
  });
}

/// Concatenates along axis 1; all other axes must agree.
template <typename T>
Var<T> concat(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat: no parts");
  Shape s = parts[0].shape();
  const int n = s.at(0);
  std::vector<std::size_t> blocks;
  int total = 0;
  for (const auto& p : parts) {
    Shape ps = p.shape();
    if (ps.size() != s.size() || ps[0] != n ||
        !std::equal(ps.begin() + 2, ps.end(), s.begin() + 2))
      throw ShapeError("concat: incompatible part " + shape_str(ps) + " vs " + shape_str(s));
    total += ps[1];
    blocks.push_back(p.size() / static_cast<std::size_t>(n));
  }
  s[1] = total;
  Tensor<T> y(s);
  const std::size_t row = y.size() / static_cast<std::size_t>(n);
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto& src = parts[k].value().data;
    for (int i = 0; i < n; ++i)
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(i * blocks[k]), blocks[k],
                  y.data.begin() + static_cast<std::ptrdiff_t>(i * row + off));
    off += blocks[k];
  }
  return make_op<T>(std::move(y), parts, [blocks, n, row](Node<T>& self) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < blocks.size(); ++k) {
      auto& p = *self.parents[k];
      if (p.needs_grad)
        for (int i = 0; i < n; ++i)
          for (std::size_t j = 0; j < blocks[k]; ++j)
            p.grad[i * blocks[k] + j] += self.grad[i * row + off + j];
      off += blocks[k];
    }
  });
}

/// Columns [begin, begin+len) of a rank-2 tensor.
template <typename T>
Var<T> slice_cols(const Var<T>& x, int begin, int len) {
  if (x.value().rank() != 2 || begin < 0 || begin + len > x.shape()[1])
    throw ShapeError("slice_cols: out of range on " + shape_str(x.shape()));
  const int n = x.shape()[0], f = x.shape()[1];
  Tensor<T> y({n, len});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < len; ++j)
      y.data[static_cast<std::size_t>(i * len + j)] = x.value().data[static_cast<std::size_t>(i * f + begin + j)];
  return make_op<T>(std::move(y), {x}, [n, f, begin, len](Node<T>& self) {
    auto& px = *self.parents[0];
    if (!px.needs_grad) return;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < len; ++j)
        px.grad[static_cast<std::size_t>(i * f + begin + j)] += self.grad[static_cast<std::size_t>(i * len + j)];
  });
}

/// Tiles x[N,A] into x[N,A,H,W] (constant over space).
template <typename T>
Var<T> broadcast_spatial(const Var<T>& x, int h, int w) {
  if (x.value().rank() != 2) throw ShapeError("broadcast_spatial: expected rank 2");
  const int n = x.shape()[0], a = x.shape()[1];
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  Tensor<T> y({n, a, h, w});
  for (int i = 0; i < n * a; ++i)
    std::fill_n(y.data.begin() + static_cast<std::ptrdiff_t>(i * plane), plane,
                x.value().data[static_cast<std::size_t>(i)]);
  return make_op<T>(std::move(y), {x}, [n, a, plane](Node<T>& self) {
    auto& px = *self.parents[0];
    if (!px.needs_grad) return;
    for (int i = 0; i < n * a; ++i) {
      T acc = 0;
      for (std::size_t j = 0; j < plane; ++j) acc += self.grad[i * plane + j];
      px.grad[static_cast<std::size_t>(i)] += acc;
    }
  });
}

/// Mean of all elements, as a one-element tensor.
template <typename T>
Var<T> mean(const Var<T>& x) {
  T acc = 0;
  for (T v : x.value().data) acc += v;
  const T inv = T(1) / static_cast<T>(x.size());
  return make_op<T>(Tensor<T>({1}, {acc * inv}), {x}, [inv](Node<T>& self) {
    auto& px = *self.parents[0];
    if (!px.needs_grad) return;
    for (auto& g : px.grad) g += self.grad[0] * inv;
  });
}

/// Inner product with a constant tensor of the same size: sum_i w_i x_i.
template <typename T>
Var<T> inner(const Var<T>& x, const Tensor<T>& w) {
  if (w.size() != x.size()) throw ShapeError("inner: size mismatch");
  T acc = 0;
  for (std::size_t i = 0; i < w.size(); ++i) acc += w.data[i] * x.value().data[i];
  return make_op<T>(Tensor<T>({1}, {acc}), {x}, [w](Node<T>& self) {
    auto& px = *self.parents[0];
    if (!px.needs_grad) return;
    for (std::size_t i = 0; i < w.size(); ++i) px.grad[i] += self.grad[0] * w.data[i];
  });
}

}  // namespace rsgan::ad
