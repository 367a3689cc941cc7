#pragma once

// Reverse-mode differentiation over Tensor. A Tape records every operation in
// execution order; backward() replays the adjoint rules in strict reverse order.

#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wavecast/errors.hpp"
#include "wavecast/rng.hpp"
#include "wavecast/tensor.hpp"

namespace wavecast {

/// A learnable tensor. `grad` always has the shape of `value`.
struct Parameter {
  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(Tensor::zeros_like(value)) {}

  void zero_grad() { grad.fill(0.0); }

  std::string name;
  Tensor value;
  Tensor grad;
};

/// Ordered collection of named parameters with stable element addresses.
class ParameterSet {
 public:
  std::size_t add(std::string name, Tensor value) {
    if (find(name) != nullptr) throw ContractError("duplicate parameter name '" + name + "'");
    params_.emplace_back(std::move(name), std::move(value));
    return params_.size() - 1;
  }

  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }

  Parameter* find(std::string_view name) {
    for (auto& p : params_)
      if (p.name == name) return &p;
    return nullptr;
  }
  const Parameter* find(std::string_view name) const {
    for (const auto& p : params_)
      if (p.name == name) return &p;
    return nullptr;
  }

  std::size_t size() const { return params_.size(); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  std::vector<Parameter*> pointers() {
    std::vector<Parameter*> out;
    for (auto& p : params_) out.push_back(&p);
    return out;
  }

 private:
  std::deque<Parameter> params_;
};

class Tape;

/// Handle to a node on a Tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t id() const { return id_; }
  Tape* tape() const { return tape_; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  /// Adjoint rule of one node: reads the node's output gradient and accumulates
  /// into its inputs through Tape::grad_of.
  using Backward = std::function<void(Tape&, std::size_t)>;

  Tape() = default;
  explicit Tape(bool grad_enabled) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const { return grad_enabled_; }

  Var constant(Tensor value) {
    nodes_.push_back(Node{std::move(value)});
    return Var(this, nodes_.size() - 1);
  }

  Var param(Parameter& p) {
    Node n{p.value};
    if (grad_enabled_) {
      n.requires_grad = true;
      n.param = &p;
    }
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
  }

  /// Appends an op node. The adjoint closure is dropped when no input needs a gradient.
  Var record(Tensor value, std::initializer_list<std::size_t> inputs, Backward backward) {
    return record(std::move(value), std::span<const std::size_t>(inputs.begin(), inputs.size()),
                  std::move(backward));
  }

  Var record(Tensor value, std::span<const std::size_t> inputs, Backward backward) {
    bool needs = false;
    for (auto id : inputs) needs = needs || nodes_.at(id).requires_grad;
#ifndef NDEBUG
    bool finite_in = true;
    for (auto id : inputs) finite_in = finite_in && nodes_[id].value.all_finite();
    if (finite_in && !value.all_finite()) throw DomainError("non-finite output from finite inputs");
#endif
    Node n{std::move(value)};
    if (needs && grad_enabled_) {
      n.requires_grad = true;
      n.backward = std::move(backward);
    }
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
  }

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Gradient buffer of a node, allocated as zeros on first access.
  Tensor& grad_of(std::size_t id) {
    Node& n = nodes_.at(id);
    if (!n.has_grad) {
      n.grad = Tensor::zeros_like(n.value);
      n.has_grad = true;
    }
    return n.grad;
  }

  /// Accumulates d(loss)/d(param) into every reachable Parameter's grad.
  void backward(Var loss) {
    if (loss.tape() != this) throw ContractError("loss does not belong to this tape");
    if (value(loss.id()).size() != 1) {
      throw ContractError("backward requires a scalar loss, got shape " + to_string(loss.shape()));
    }
    grad_of(loss.id())[0] = 1.0;
    for (std::size_t id = loss.id() + 1; id-- > 0;) {
      Node& n = nodes_[id];
      if (!n.has_grad) continue;
      if (n.backward) n.backward(*this, id);
      if (n.param != nullptr) {
        auto& pg = n.param->grad.storage();
        const auto& g = n.grad.storage();
        for (std::size_t i = 0; i < g.size(); ++i) pg[i] += g[i];
      }
    }
  }

 private:
  struct Node {
    Tensor value;
    Tensor grad{};
    bool has_grad = false;
    bool requires_grad = false;
    Parameter* param = nullptr;
    Backward backward{};
  };

  // deque: references to existing nodes survive appends.
  std::deque<Node> nodes_;
  bool grad_enabled_ = true;
};

inline const Tensor& Var::value() const { return tape_->value(id_); }

namespace detail {

inline void same_tape(Var a, Var b) {
  if (a.tape() != b.tape() || a.tape() == nullptr) throw ContractError("operands live on different tapes");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise

enum class BinaryOp { Add, Sub, Mul, Div };

inline Var elementwise(BinaryOp op, Var a, Var b) {
  detail::same_tape(a, b);
  Tape& tape = *a.tape();
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const Shape out_shape = detail::broadcast_shape(av.shape(), bv.shape());
  const auto sa = detail::broadcast_strides(av.shape(), out_shape);
  const auto sb = detail::broadcast_strides(bv.shape(), out_shape);
  Tensor out(out_shape);
  auto& o = out.storage();
  const auto& x = av.storage();
  const auto& y = bv.storage();
  auto apply = [&](auto f) {
    if (av.shape() == bv.shape()) {
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = f(x[i], y[i]);
    } else {
      detail::for_each_broadcast(out_shape, sa, sb,
                                 [&](std::size_t i, std::size_t ia, std::size_t ib) { o[i] = f(x[ia], y[ib]); });
    }
  };
  switch (op) {
    case BinaryOp::Add: apply([](double p, double q) { return p + q; }); break;
    case BinaryOp::Sub: apply([](double p, double q) { return p - q; }); break;
    case BinaryOp::Mul: apply([](double p, double q) { return p * q; }); break;
    case BinaryOp::Div: apply([](double p, double q) { return p / q; }); break;
  }
  const std::size_t ida = a.id(), idb = b.id();
  return tape.record(std::move(out), {ida, idb}, [=](Tape& t, std::size_t self) {
    const auto& g = t.grad_of(self).storage();
    const auto& xa = t.value(ida).storage();
    const auto& xb = t.value(idb).storage();
    const bool need_a = t.requires_grad(ida);
    const bool need_b = t.requires_grad(idb);
    std::vector<double>* ga = need_a ? &t.grad_of(ida).storage() : nullptr;
    std::vector<double>* gb = need_b ? &t.grad_of(idb).storage() : nullptr;
    detail::for_each_broadcast(out_shape, sa, sb, [&](std::size_t i, std::size_t ia, std::size_t ib) {
      switch (op) {
        case BinaryOp::Add:
          if (ga) (*ga)[ia] += g[i];
          if (gb) (*gb)[ib] += g[i];
          break;
        case BinaryOp::Sub:
          if (ga) (*ga)[ia] += g[i];
          if (gb) (*gb)[ib] -= g[i];
          break;
        case BinaryOp::Mul:
          if (ga) (*ga)[ia] += g[i] * xb[ib];
          if (gb) (*gb)[ib] += g[i] * xa[ia];
          break;
        case BinaryOp::Div:
          if (ga) (*ga)[ia] += g[i] / xb[ib];
          if (gb) (*gb)[ib] -= g[i] * xa[ia] / (xb[ib] * xb[ib]);
          break;
      }
    });
  });
}

inline Var elementwise(BinaryOp op, Var a, double s) {
  Tape& tape = *a.tape();
  Tensor out = a.value();
  for (auto& v : out.storage()) {
    switch (op) {
      case BinaryOp::Add: v += s; break;
      case BinaryOp::Sub: v -= s; break;
      case BinaryOp::Mul: v *= s; break;
      case BinaryOp::Div: v /= s; break;
    }
  }
  const std::size_t ida = a.id();
  return tape.record(std::move(out), {ida}, [=](Tape& t, std::size_t self) {
    const auto& g = t.grad_of(self).storage();
    auto& ga = t.grad_of(ida).storage();
    const double scale = op == BinaryOp::Mul ? s : op == BinaryOp::Div ? 1.0 / s : 1.0;
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * scale;
  });
}

inline Var operator+(Var a, Var b) { return elementwise(BinaryOp::Add, a, b); }
inline Var operator-(Var a, Var b) { return elementwise(BinaryOp::Sub, a, b); }
inline Var operator*(Var a, Var b) { return elementwise(BinaryOp::Mul, a, b); }
inline Var operator/(Var a, Var b) { return elementwise(BinaryOp::Div, a, b); }
inline Var operator+(Var a, double s) { return elementwise(BinaryOp::Add, a, s); }
inline Var operator-(Var a, double s) { return elementwise(BinaryOp::Sub, a, s); }
inline Var operator*(Var a, double s) { return elementwise(BinaryOp::Mul, a, s); }
inline Var operator/(Var a, double s) { return elementwise(BinaryOp::Div, a, s); }
inline Var operator*(double s, Var a) { return elementwise(BinaryOp::Mul, a, s); }

namespace detail {

/// Pointwise map with derivative expressed through (x, y).
template <typename F, typename DF>
Var unary(Var x, F f, DF df) {
  Tape& tape = *x.tape();
  Tensor out = x.value();
  for (auto& v : out.storage()) v = f(v);
  const std::size_t idx = x.id();
  return tape.record(std::move(out), {idx}, [=](Tape& t, std::size_t self) {
    const auto& g = t.grad_of(self).storage();
    const auto& xv = t.value(idx).storage();
    const auto& yv = t.value(self).storage();
    auto& gx = t.grad_of(idx).storage();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * df(xv[i], yv[i]);
  });
}

}  // namespace detail

inline Var neg(Var x) { return x * -1.0; }

inline Var square(Var x) {
  return detail::unary(x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

inline Var sigmoid(Var x) {
  return detail::unary(
      x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); }, [](double, double y) { return y * (1.0 - y); });
}

inline Var tanh(Var x) {
  return detail::unary(x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

/// GELU, x * Phi(x) with the exact Gaussian CDF.
inline Var gelu(Var x) {
  return detail::unary(
      x, [](double v) { return 0.5 * v * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0)); },
      [](double v, double) {
        const double cdf = 0.5 * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
        const double pdf = std::exp(-0.5 * v * v) / std::sqrt(2.0 * std::numbers::pi);
        return cdf + v * pdf;
      });
}

// ---------------------------------------------------------------------------
// Reductions and layout

inline Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().storage()) s += v;
  const std::size_t idx = x.id();
  return x.tape()->record(Tensor::scalar(s), {idx}, [=](Tape& t, std::size_t self) {
    const double g = t.grad_of(self)[0];
    for (auto& v : t.grad_of(idx).storage()) v += g;
  });
}

inline Var mean(Var x) { return sum(x) / static_cast<double>(x.value().size()); }

inline Var reshape(Var x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  const std::size_t idx = x.id();
  return x.tape()->record(std::move(out), {idx}, [=](Tape& t, std::size_t self) {
    const auto& g = t.grad_of(self).storage();
    auto& gx = t.grad_of(idx).storage();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

namespace detail {

/// Row-major offsets into `in_shape` for each output element of a permutation.
inline std::vector<std::size_t> permutation_offsets(const Shape& in_shape, std::span<const std::size_t> axes) {
  const std::size_t rank = in_shape.size();
  std::vector<std::size_t> in_strides(rank, 1);
  for (std::size_t i = rank; i-- > 1;) in_strides[i - 1] = in_strides[i] * in_shape[i];
  Shape out_shape(rank);
  std::vector<std::size_t> step(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    out_shape[i] = in_shape[axes[i]];
    step[i] = in_strides[axes[i]];
  }
  const std::size_t total = element_count(in_shape);
  std::vector<std::size_t> offsets(total);
  std::vector<std::size_t> idx(rank, 0);
  std::size_t off = 0;
  for (std::size_t n = 0; n < total; ++n) {
    offsets[n] = off;
    for (std::size_t axis = rank; axis-- > 0;) {
      ++idx[axis];
      off += step[axis];
      if (idx[axis] < out_shape[axis]) break;
      off -= step[axis] * out_shape[axis];
      idx[axis] = 0;
    }
  }
  return offsets;
}

}  // namespace detail

/// Reorders axes: output axis i is input axis axes[i].
inline Var permute(Var x, std::vector<std::size_t> axes) {
  const Tensor& xv = x.value();
  if (axes.size() != xv.rank()) throw ShapeError("permute axes do not match rank of " + to_string(xv.shape()));
  std::vector<bool> seen(axes.size(), false);
  for (auto a : axes) {
    if (a >= axes.size() || seen[a]) throw ShapeError("invalid permutation for " + to_string(xv.shape()));
    seen[a] = true;
  }
  Shape out_shape(axes.size());
  for (std::size_t i = 0; i < axes.size(); ++i) out_shape[i] = xv.shape()[axes[i]];
  auto offsets = std::make_shared<std::vector<std::size_t>>(detail::permutation_offsets(xv.shape(), axes));
  Tensor out(out_shape);
  for (std::size_t n = 0; n < offsets->size(); ++n) out[n] = xv[(*offsets)[n]];
  const std::size_t idx = x.id();
  return x.tape()->record(std::move(out), {idx}, [=](Tape& t, std::size_t self) {
    const auto& g = t.grad_of(self).storage();
    auto& gx = t.grad_of(idx).storage();
    for (std::size_t n = 0; n < g.size(); ++n) gx[(*offsets)[n]] += g[n];
  });
}

inline Var transpose_last2(Var x) {
  const std::size_t r = x.value().rank();
  if (r < 2) throw ShapeError("transpose needs rank >= 2, got " + to_string(x.shape()));
  std::vector<std::size_t> axes(r);
  std::iota(axes.begin(), axes.end(), std::size_t{0});
  std::swap(axes[r - 1], axes[r - 2]);
  return permute(x, std::move(axes));
}

/// Sub-range [begin, end) along one axis.
inline Var slice(Var x, std::size_t axis, std::size_t begin, std::size_t end) {
  const Tensor& xv = x.value();
  if (axis >= xv.rank() || begin >= end || end > xv.dim(axis)) {
    throw ShapeError("slice [" + std::to_string(begin) + "," + std::to_string(end) + ") on axis " +
                     std::to_string(axis) + " of " + to_string(xv.shape()));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= xv.dim(i);
  for (std::size_t i = axis + 1; i < xv.rank(); ++i) inner *= xv.dim(i);
  const std::size_t extent = xv.dim(axis);
  const std::size_t width = (end - begin) * inner;
  Shape out_shape = xv.shape();
  out_shape[axis] = end - begin;
  Tensor out(out_shape);
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(xv.storage().begin() + (o * extent + begin) * inner, width, out.storage().begin() + o * width);
  }
  const std::size_t idx = x.id();
  return x.tape()->record(std::move(out), {idx}, [=](Tape& t, std::size_t self) {
    const auto& g = t.grad_of(self).storage();
    auto& gx = t.grad_of(idx).storage();
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t j = 0; j < width; ++j) gx[(o * extent + begin) * inner + j] += g[o * width + j];
  });
}

/// Joins tensors along an axis; all other extents must agree.
inline Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  Tape& tape = *parts.front().tape();
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) throw ShapeError("concat axis out of range for " + to_string(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = i == axis || s[i] == first[i];
    if (!ok) throw ShapeError("cannot concat " + to_string(s) + " with " + to_string(first));
    out_shape[axis] += s[axis];
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= first[i];
  for (std::size_t i = axis + 1; i < first.size(); ++i) inner *= first[i];
  Tensor out(out_shape);
  std::vector<std::size_t> ids, widths;
  const std::size_t row = out_shape[axis] * inner;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.shape()[axis] * inner;
    const auto& src = p.value().storage();
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(src.begin() + o * w, w, out.storage().begin() + o * row + offset);
    offset += w;
    ids.push_back(p.id());
    widths.push_back(w);
  }
  return tape.record(std::move(out), ids, [=](Tape& t, std::size_t self) {
    const auto& g = t.grad_of(self).storage();
    std::size_t off = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (t.requires_grad(ids[k])) {
        auto& gp = t.grad_of(ids[k]).storage();
        for (std::size_t o = 0; o < outer; ++o)
          for (std::size_t j = 0; j < widths[k]; ++j) gp[o * widths[k] + j] += g[o * row + off + j];
      }
      off += widths[k];
    }
  });
}

// ---------------------------------------------------------------------------
// Linear algebra

/// a[..., m, k] x b[k, n] (shared right operand), or batched a[..., m, k] x b[..., k, n]
/// with identical leading extents.
inline Var matmul(Var a, Var b) {
  detail::same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() < 2 || bv.rank() < 2) {
    throw ShapeError("matmul needs rank >= 2 operands, got " + to_string(av.shape()) + " and " + to_string(bv.shape()));
  }
  const std::size_t m = av.dim(av.rank() - 2), k = av.dim(av.rank() - 1);
  const std::size_t kb = bv.dim(bv.rank() - 2), n = bv.dim(bv.rank() - 1);
  if (k != kb) {
    throw ShapeError("matmul inner extents differ: " + to_string(av.shape()) + " x " + to_string(bv.shape()));
  }
  const bool shared = bv.rank() == 2;
  std::size_t batch = 1;
  for (std::size_t i = 0; i + 2 < av.rank(); ++i) batch *= av.dim(i);
  if (!shared) {
    const Shape lead_a(av.shape().begin(), av.shape().end() - 2);
    const Shape lead_b(bv.shape().begin(), bv.shape().end() - 2);
    if (lead_a != lead_b) {
      throw ShapeError("matmul batch extents differ: " + to_string(av.shape()) + " x " + to_string(bv.shape()));
    }
  }
  Shape out_shape = av.shape();
  out_shape.back() = n;
  Tensor out(out_shape);
  if (shared) {
    detail::gemm_nn(av.storage().data(), bv.storage().data(), out.storage().data(), batch * m, k, n);
  } else {
    for (std::size_t s = 0; s < batch; ++s) {
      detail::gemm_nn(av.storage().data() + s * m * k, bv.storage().data() + s * k * n,
                      out.storage().data() + s * m * n, m, k, n);
    }
  }
  const std::size_t ida = a.id(), idb = b.id();
  return a.tape()->record(std::move(out), {ida, idb}, [=](Tape& t, std::size_t self) {
    const double* g = t.grad_of(self).storage().data();
    const double* x = t.value(ida).storage().data();
    const double* y = t.value(idb).storage().data();
    const bool need_a = t.requires_grad(ida), need_b = t.requires_grad(idb);
    if (shared) {
      if (need_a) detail::gemm_nt(g, y, t.grad_of(ida).storage().data(), batch * m, n, k);
      if (need_b) detail::gemm_tn(x, g, t.grad_of(idb).storage().data(), batch * m, k, n);
      return;
    }
    for (std::size_t s = 0; s < batch; ++s) {
      if (need_a) detail::gemm_nt(g + s * m * n, y + s * k * n, t.grad_of(ida).storage().data() + s * m * k, m, n, k);
      if (need_b) detail::gemm_tn(x + s * m * k, g + s * m * n, t.grad_of(idb).storage().data() + s * k * n, m, k, n);
    }
  });
}

/// Softmax over the last axis with max subtraction.
inline Var softmax_lastdim(Var x) {
  const Tensor& xv = x.value();
  const std::size_t d = xv.rank() == 0 ? 1 : xv.shape().back();
  const std::size_t rows = xv.size() / d;
  Tensor out(xv.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.storage().data() + r * d;
    double* o = out.storage().data() + r * d;
    const double mx = *std::max_element(in, in + d);
    double z = 0.0;
    for (std::size_t j = 0; j < d; ++j) z += (o[j] = std::exp(in[j] - mx));
    for (std::size_t j = 0; j < d; ++j) o[j] /= z;
  }
  const std::size_t idx = x.id();
  return x.tape()->record(std::move(out), {idx}, [=](Tape& t, std::size_t self) {
    const auto& g = t.grad_of(self).storage();
    const auto& y = t.value(self).storage();
    auto& gx = t.grad_of(idx).storage();
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t j = 0; j < d; ++j) dot += g[r * d + j] * y[r * d + j];
      for (std::size_t j = 0; j < d; ++j) gx[r * d + j] += y[r * d + j] * (g[r * d + j] - dot);
    }
  });
}

inline constexpr double kLayerNormEps = 1e-5;

/// Normalizes each last-axis slice to zero mean / unit variance, then applies gain and bias.
inline Var layer_norm(Var x, Var gain, Var bias) {
  detail::same_tape(x, gain);
  detail::same_tape(x, bias);
  const Tensor& xv = x.value();
  const std::size_t d = xv.shape().back();
  if (gain.shape() != Shape{d} || bias.shape() != Shape{d}) {
    throw ShapeError("layer_norm affine shapes " + to_string(gain.shape()) + "/" + to_string(bias.shape()) +
                     " do not match last extent of " + to_string(xv.shape()));
  }
  const std::size_t rows = xv.size() / d;
  auto xhat = std::make_shared<std::vector<double>>(xv.size());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  Tensor out(xv.shape());
  const auto& g = gain.value().storage();
  const auto& b = bias.value().storage();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.storage().data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += in[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (in[j] - mu) * (in[j] - mu);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    (*inv_std)[r] = inv;
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (in[j] - mu) * inv;
      (*xhat)[r * d + j] = h;
      out[r * d + j] = g[j] * h + b[j];
    }
  }
  const std::size_t idx = x.id(), idg = gain.id(), idb = bias.id();
  return x.tape()->record(std::move(out), {idx, idg, idb}, [=](Tape& t, std::size_t self) {
    const auto& go = t.grad_of(self).storage();
    const auto& gv = t.value(idg).storage();
    const bool need_x = t.requires_grad(idx);
    std::vector<double>* gx = need_x ? &t.grad_of(idx).storage() : nullptr;
    std::vector<double>* gg = t.requires_grad(idg) ? &t.grad_of(idg).storage() : nullptr;
    std::vector<double>* gb = t.requires_grad(idb) ? &t.grad_of(idb).storage() : nullptr;
    std::vector<double> dxhat(d);
    for (std::size_t r = 0; r < rows; ++r) {
      double mean_d = 0.0, mean_dh = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double gj = go[r * d + j];
        const double h = (*xhat)[r * d + j];
        if (gg) (*gg)[j] += gj * h;
        if (gb) (*gb)[j] += gj;
        dxhat[j] = gj * gv[j];
        mean_d += dxhat[j];
        mean_dh += dxhat[j] * h;
      }
      if (!gx) continue;
      mean_d /= static_cast<double>(d);
      mean_dh /= static_cast<double>(d);
      const double inv = (*inv_std)[r];
      for (std::size_t j = 0; j < d; ++j) {
        (*gx)[r * d + j] += inv * (dxhat[j] - mean_d - (*xhat)[r * d + j] * mean_dh);
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Convolution on the sphere-like grid: periodic in longitude (last axis),
// replicate padding in latitude.

namespace detail {

/// [C, H+2, W+2] halo copy of a [C, H, W] block.
inline void pad_lat_replicate_lon_wrap(const double* x, std::size_t c, std::size_t h, std::size_t w, double* out) {
  const std::size_t pw = w + 2;
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t r = 0; r < h + 2; ++r) {
      const std::size_t src_r = r == 0 ? 0 : (r == h + 1 ? h - 1 : r - 1);
      const double* src = x + (ch * h + src_r) * w;
      double* dst = out + (ch * (h + 2) + r) * pw;
      dst[0] = src[w - 1];
      std::copy_n(src, w, dst + 1);
      dst[w + 1] = src[0];
    }
  }
}

/// Adjoint of the halo copy: folds padded gradients back onto [C, H, W].
inline void unpad_accumulate(const double* gp, std::size_t c, std::size_t h, std::size_t w, double* gx) {
  const std::size_t pw = w + 2;
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t r = 0; r < h + 2; ++r) {
      const std::size_t dst_r = r == 0 ? 0 : (r == h + 1 ? h - 1 : r - 1);
      const double* src = gp + (ch * (h + 2) + r) * pw;
      double* dst = gx + (ch * h + dst_r) * w;
      dst[w - 1] += src[0];
      for (std::size_t j = 0; j < w; ++j) dst[j] += src[j + 1];
      dst[0] += src[w + 1];
    }
  }
}

}  // namespace detail

/// 3x3 convolution. x is [C_in, H, W] or [B, C_in, H, W]; kernels [C_out, C_in, 3, 3].
inline Var conv2d(Var x, Var kernels) {
  detail::same_tape(x, kernels);
  const Tensor& xv = x.value();
  const Tensor& kv = kernels.value();
  if (xv.rank() != 3 && xv.rank() != 4) throw ShapeError("conv2d input must be rank 3 or 4, got " + to_string(xv.shape()));
  if (kv.rank() != 4 || kv.dim(2) != 3 || kv.dim(3) != 3) {
    throw ShapeError("conv2d kernels must be [C_out, C_in, 3, 3], got " + to_string(kv.shape()));
  }
  const std::size_t off = xv.rank() - 3;
  const std::size_t batch = off ? xv.dim(0) : 1;
  const std::size_t cin = xv.dim(off), h = xv.dim(off + 1), w = xv.dim(off + 2);
  const std::size_t cout = kv.dim(0);
  if (kv.dim(1) != cin) {
    throw ShapeError("conv2d channel mismatch: input " + to_string(xv.shape()) + ", kernels " + to_string(kv.shape()));
  }
  Shape out_shape = xv.shape();
  out_shape[off] = cout;
  Tensor out(out_shape);
  const std::size_t ph = h + 2, pw = w + 2;
  std::vector<double> padded(cin * ph * pw);
  for (std::size_t s = 0; s < batch; ++s) {
    detail::pad_lat_replicate_lon_wrap(xv.storage().data() + s * cin * h * w, cin, h, w, padded.data());
    double* o = out.storage().data() + s * cout * h * w;
    for (std::size_t co = 0; co < cout; ++co)
      for (std::size_t ci = 0; ci < cin; ++ci)
        for (std::size_t ky = 0; ky < 3; ++ky)
          for (std::size_t kx = 0; kx < 3; ++kx) {
            const double kw = kv[((co * cin + ci) * 3 + ky) * 3 + kx];
            for (std::size_t y = 0; y < h; ++y) {
              const double* prow = padded.data() + (ci * ph + y + ky) * pw + kx;
              double* orow = o + (co * h + y) * w;
              for (std::size_t j = 0; j < w; ++j) orow[j] += kw * prow[j];
            }
          }
  }
  const std::size_t idx = x.id(), idk = kernels.id();
  return x.tape()->record(std::move(out), {idx, idk}, [=](Tape& t, std::size_t self) {
    const auto& g = t.grad_of(self).storage();
    const auto& xin = t.value(idx).storage();
    const auto& kin = t.value(idk).storage();
    const bool need_x = t.requires_grad(idx), need_k = t.requires_grad(idk);
    std::vector<double> pad(cin * ph * pw), gpad(cin * ph * pw);
    for (std::size_t s = 0; s < batch; ++s) {
      detail::pad_lat_replicate_lon_wrap(xin.data() + s * cin * h * w, cin, h, w, pad.data());
      std::fill(gpad.begin(), gpad.end(), 0.0);
      const double* go = g.data() + s * cout * h * w;
      for (std::size_t co = 0; co < cout; ++co)
        for (std::size_t ci = 0; ci < cin; ++ci)
          for (std::size_t ky = 0; ky < 3; ++ky)
            for (std::size_t kx = 0; kx < 3; ++kx) {
              const std::size_t kidx = ((co * cin + ci) * 3 + ky) * 3 + kx;
              const double kw = kin[kidx];
              double acc = 0.0;
              for (std::size_t y = 0; y < h; ++y) {
                const double* grow = go + (co * h + y) * w;
                const std::size_t prow = (ci * ph + y + ky) * pw + kx;
                if (need_k)
                  for (std::size_t j = 0; j < w; ++j) acc += grow[j] * pad[prow + j];
                if (need_x)
                  for (std::size_t j = 0; j < w; ++j) gpad[prow + j] += kw * grow[j];
              }
              if (need_k) t.grad_of(idk)[kidx] += acc;
            }
      if (need_x) detail::unpad_accumulate(gpad.data(), cin, h, w, t.grad_of(idx).storage().data() + s * cin * h * w);
    }
  });
}

// ---------------------------------------------------------------------------
// Verification harness

/// Max over sampled coordinates of |analytic - central difference| / max(1, |central difference|).
/// `loss` must build a scalar on the given tape, binding parameters with Tape::param.
/// `max_coords_per_param` == 0 checks every coordinate.
inline double grad_check(const std::function<Var(Tape&)>& loss, std::span<Parameter* const> params, double h,
                         std::size_t max_coords_per_param = 0, std::uint64_t seed = 1) {
  for (auto* p : params) p->zero_grad();
  {
    Tape tape;
    Var l = loss(tape);
    tape.backward(l);
  }
  auto evaluate = [&]() {
    Tape tape(false);
    return loss(tape).value().item();
  };
  CounterRng rng(seed);
  double worst = 0.0;
  for (auto* p : params) {
    const std::size_t n = p->value.size();
    std::vector<std::size_t> coords(n);
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (max_coords_per_param != 0 && max_coords_per_param < n) {
      rng.shuffle(std::span<std::size_t>(coords));
      coords.resize(max_coords_per_param);
    }
    for (auto i : coords) {
      const double saved = p->value[i];
      p->value[i] = saved + h;
      const double up = evaluate();
      p->value[i] = saved - h;
      const double down = evaluate();
      p->value[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double err = std::abs(p->grad[i] - numeric) / std::max(1.0, std::abs(numeric));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Initialization

/// Uniform on (-a, a), a = sqrt(6 / (fan_in + fan_out)).
inline Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, CounterRng& rng) {
  Tensor t(std::move(shape));
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : t.storage()) v = rng.uniform(-a, a);
  return t;
}

}  // namespace wavecast
