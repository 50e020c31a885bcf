#include "bwsl/autodiff.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "bwsl/errors.hpp"

namespace bwsl::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

[[noreturn]] void shape_fail(const char* op, const std::string& detail) {
  throw ShapeError(std::string("shape mismatch in ") + op + ": " + detail);
}

struct Dims {
  std::size_t r;
  std::size_t c;
};

Dims dims2(const Shape& s, const char* op) {
  switch (s.size()) {
    case 0:
      return {1, 1};
    case 1:
      return {1, s[0]};
    case 2:
      return {s[0], s[1]};
    default:
      shape_fail(op, "rank > 2 operand " + shape_string(s));
  }
}

Shape broadcast_shape(const Shape& a, const Shape& b, const char* op) {
  if (a == b) return a;
  const Dims da = dims2(a, op);
  const Dims db = dims2(b, op);
  auto pick = [&](std::size_t x, std::size_t y) {
    if (x == y || y == 1) return x;
    if (x == 1) return y;
    shape_fail(op, shape_string(a) + " vs " + shape_string(b));
  };
  const Dims out{pick(da.r, db.r), pick(da.c, db.c)};
  if (out.r == da.r && out.c == da.c) return a;
  if (out.r == db.r && out.c == db.c) return b;
  return Shape{out.r, out.c};
}

// Sums a gradient of broadcast shape back down to the operand shape.
Tensor reduce_to(const Tensor& g, const Shape& target) {
  if (g.shape() == target) return g;
  const Dims dg = dims2(g.shape(), "reduce");
  const Dims dt = dims2(target, "reduce");
  Tensor out(target);
  for (std::size_t r = 0; r < dg.r; ++r) {
    const std::size_t tr = dt.r == 1 ? 0 : r;
    for (std::size_t c = 0; c < dg.c; ++c) {
      const std::size_t tc = dt.c == 1 ? 0 : c;
      out[tr * dt.c + tc] += g[r * dg.c + c];
    }
  }
  return out;
}

template <typename F>
Tensor broadcast_apply(const Tensor& a, const Tensor& b, const Shape& out_shape, F f) {
  Tensor out(out_shape);
  if (a.shape() == b.shape()) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(a[i], b[i]);
    return out;
  }
  const Dims d = dims2(out_shape, "broadcast");
  const Dims da = dims2(a.shape(), "broadcast");
  const Dims db = dims2(b.shape(), "broadcast");
  for (std::size_t r = 0; r < d.r; ++r) {
    const std::size_t ar = da.r == 1 ? 0 : r;
    const std::size_t br = db.r == 1 ? 0 : r;
    for (std::size_t c = 0; c < d.c; ++c) {
      const std::size_t ac = da.c == 1 ? 0 : c;
      const std::size_t bc = db.c == 1 ? 0 : c;
      out[r * d.c + c] = f(a[ar * da.c + ac], b[br * db.c + bc]);
    }
  }
  return out;
}

template <typename F>
Tensor map(const Tensor& a, F f) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return out;
}

Tape& tape_of(Var a, const char* op) {
  if (a.tape == nullptr) shape_fail(op, "variable is not attached to a tape");
  return *a.tape;
}

Tape& tape_of(Var a, Var b, const char* op) {
  if (a.tape != b.tape || a.tape == nullptr) shape_fail(op, "operands live on different tapes");
  return *a.tape;
}

Tensor from_rowmat(const RowMat& m) {
  Tensor out(Shape{static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
  std::copy(m.data(), m.data() + m.size(), out.data().begin());
  return out;
}

}  // namespace

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_size(shape_)) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                     shape_string(shape_));
  }
}

Tensor Tensor::vector(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor(Shape{n}, std::move(v));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> data) {
  return Tensor(Shape{rows, cols}, std::move(data));
}

std::size_t Tensor::rows() const { return shape_.size() == 2 ? shape_[0] : 1; }

std::size_t Tensor::cols() const { return shape_.empty() ? 1 : shape_.back(); }

double Tensor::item() const {
  if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + shape_string(shape_));
  return data_[0];
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

const Tensor& Var::value() const { return tape->value(id); }
const Tensor& Var::grad() const { return tape->grad(id); }

Var Tape::leaf(Tensor value, bool requires_grad) {
  if (!value.all_finite()) throw NumericError("non-finite value supplied to tape leaf");
  Node n{"leaf", std::move(value), {}, false, requires_grad, {}, {}};
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Var Tape::record(const char* op, Tensor value, std::vector<std::size_t> parents, Backprop backprop) {
  if (!value.all_finite()) throw NumericError(std::string("non-finite result from ") + op);
  const bool needs = std::any_of(parents.begin(), parents.end(),
                                 [&](std::size_t p) { return nodes_[p].requires_grad; });
  Node n{op, std::move(value), {}, false, needs, std::move(parents), needs ? std::move(backprop) : Backprop{}};
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

const Tensor& Tape::grad(std::size_t id) const {
  const Node& n = nodes_[id];
  if (n.grad_live) return n.grad;
  if (zero_cache_.size() < nodes_.size()) zero_cache_.resize(nodes_.size());
  if (zero_cache_[id].shape() != n.value.shape() || zero_cache_[id].size() != n.value.size()) {
    zero_cache_[id] = Tensor(n.value.shape());
  }
  return zero_cache_[id];
}

Tensor& Tape::grad_slot(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.grad_live) {
    n.grad = Tensor(n.value.shape());
    n.grad_live = true;
  }
  return n.grad;
}

void Tape::accumulate(std::size_t id, Tensor&& g) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (!n.grad_live && g.shape() == n.value.shape()) {
    n.grad = std::move(g);
    n.grad_live = true;
    return;
  }
  accumulate(id, static_cast<const Tensor&>(g));
}

void Tape::accumulate(std::size_t id, const Tensor& g) {
  if (!nodes_[id].requires_grad) return;
  Tensor& slot = grad_slot(id);
  auto dst = slot.data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void Tape::backward(Var root, double seed) {
  if (root.tape != this || root.id >= nodes_.size()) throw ShapeError("backward: root is not on this tape");
  if (nodes_[root.id].value.size() != 1) {
    throw ShapeError("backward: non-scalar root of shape " + shape_string(nodes_[root.id].value.shape()));
  }
  for (Node& n : nodes_) {
    n.grad_live = false;
    n.grad = Tensor();
  }
  if (!nodes_[root.id].requires_grad) return;
  grad_slot(root.id)[0] = seed;
  for (std::size_t i = root.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.grad_live || !n.backprop) continue;
    n.backprop(*this, i);
  }
}

// ---- elementwise -----------------------------------------------------------

Var add(Var a, Var b) {
  Tape& t = tape_of(a, b, "add");
  const Shape out = broadcast_shape(a.shape(), b.shape(), "add");
  Tensor v = broadcast_apply(a.value(), b.value(), out, [](double x, double y) { return x + y; });
  const std::size_t ia = a.id, ib = b.id;
  return t.record("add", std::move(v), {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    tp.accumulate(ia, reduce_to(g, tp.value(ia).shape()));
    tp.accumulate(ib, reduce_to(g, tp.value(ib).shape()));
  });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a, b, "sub");
  const Shape out = broadcast_shape(a.shape(), b.shape(), "sub");
  Tensor v = broadcast_apply(a.value(), b.value(), out, [](double x, double y) { return x - y; });
  const std::size_t ia = a.id, ib = b.id;
  return t.record("sub", std::move(v), {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    tp.accumulate(ia, reduce_to(g, tp.value(ia).shape()));
    tp.accumulate(ib, reduce_to(map(g, [](double x) { return -x; }), tp.value(ib).shape()));
  });
}

Var mul(Var a, Var b) {
  Tape& t = tape_of(a, b, "mul");
  const Shape out = broadcast_shape(a.shape(), b.shape(), "mul");
  Tensor v = broadcast_apply(a.value(), b.value(), out, [](double x, double y) { return x * y; });
  const std::size_t ia = a.id, ib = b.id;
  return t.record("mul", std::move(v), {ia, ib}, [ia, ib, out](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    const Tensor& va = tp.value(ia);
    const Tensor& vb = tp.value(ib);
    if (tp.wants_grad(ia)) {
      Tensor ga = broadcast_apply(g, vb, out, [](double x, double y) { return x * y; });
      tp.accumulate(ia, reduce_to(ga, va.shape()));
    }
    if (tp.wants_grad(ib)) {
      Tensor gb = broadcast_apply(g, va, out, [](double x, double y) { return x * y; });
      tp.accumulate(ib, reduce_to(gb, vb.shape()));
    }
  });
}

Var scale(Var a, double k) {
  Tape& t = tape_of(a, "scale");
  const std::size_t ia = a.id;
  return t.record("scale", map(a.value(), [k](double x) { return k * x; }), {ia},
                  [ia, k](Tape& tp, std::size_t self) {
                    tp.accumulate(ia, map(tp.grad(self), [k](double x) { return k * x; }));
                  });
}

Var add_scalar(Var a, double k) {
  Tape& t = tape_of(a, "add_scalar");
  const std::size_t ia = a.id;
  return t.record("add_scalar", map(a.value(), [k](double x) { return x + k; }), {ia},
                  [ia](Tape& tp, std::size_t self) { tp.accumulate(ia, tp.grad(self)); });
}

Var neg(Var a) { return scale(a, -1.0); }

namespace {

// Unary op whose local derivative is expressed through input x and output y.
template <typename Fwd, typename Deriv>
Var unary(const char* op, Var a, Fwd fwd, Deriv deriv) {
  Tape& t = tape_of(a, op);
  const std::size_t ia = a.id;
  Tensor v = map(a.value(), fwd);
  return t.record(op, std::move(v), {ia}, [ia, deriv](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    const Tensor& x = tp.value(ia);
    const Tensor& y = tp.value(self);
    Tensor out(x.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = g[i] * deriv(x[i], y[i]);
    tp.accumulate(ia, out);
  });
}

double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var tanh(Var a) {
  return unary(
      "tanh", a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var a) {
  return unary("sigmoid", a, sigmoid_scalar, [](double, double y) { return y * (1.0 - y); });
}

Var exp(Var a) {
  return unary(
      "exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
  for (double x : a.value().data()) {
    if (!(x > 0.0)) throw NumericError("log of non-positive value " + std::to_string(x));
  }
  return unary(
      "log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var sqrt(Var a) {
  for (double x : a.value().data()) {
    if (x < 0.0) throw NumericError("sqrt of negative value " + std::to_string(x));
  }
  return unary(
      "sqrt", a, [](double x) { return std::sqrt(x); }, [](double, double y) { return 0.5 / y; });
}

Var square(Var a) {
  return unary(
      "square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

// ---- linear algebra and structure -----------------------------------------

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b, "matmul");
  if (a.value().rank() != 2 || b.value().rank() != 2 || a.value().cols() != b.value().rows()) {
    shape_fail("matmul", shape_string(a.shape()) + " x " + shape_string(b.shape()));
  }
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor v(Shape{av.rows(), bv.cols()});
  MutMap(v.data().data(), av.rows(), bv.cols()).noalias() =
      ConstMap(av.data().data(), av.rows(), av.cols()) * ConstMap(bv.data().data(), bv.rows(), bv.cols());
  const std::size_t ia = a.id, ib = b.id;
  return t.record("matmul", std::move(v), {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    const Tensor& va = tp.value(ia);
    const Tensor& vb = tp.value(ib);
    const ConstMap mg(g.data().data(), g.rows(), g.cols());
    const ConstMap ma(va.data().data(), va.rows(), va.cols());
    const ConstMap mb(vb.data().data(), vb.rows(), vb.cols());
    if (tp.wants_grad(ia)) {
      Tensor& ga = tp.grad_slot(ia);
      MutMap(ga.data().data(), va.rows(), va.cols()).noalias() += mg * mb.transpose();
    }
    if (tp.wants_grad(ib)) {
      Tensor& gb = tp.grad_slot(ib);
      MutMap(gb.data().data(), vb.rows(), vb.cols()).noalias() += ma.transpose() * mg;
    }
  });
}

Var transpose(Var a) {
  Tape& t = tape_of(a, "transpose");
  if (a.value().rank() != 2) shape_fail("transpose", "needs rank 2, got " + shape_string(a.shape()));
  const ConstMap ma(a.value().data().data(), a.value().rows(), a.value().cols());
  const std::size_t ia = a.id;
  return t.record("transpose", from_rowmat(ma.transpose()), {ia}, [ia](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    const ConstMap mg(g.data().data(), g.rows(), g.cols());
    tp.accumulate(ia, from_rowmat(mg.transpose()));
  });
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) shape_fail("concat", "no operands");
  if (axis > 1) shape_fail("concat", "axis must be 0 or 1");
  Tape& t = tape_of(parts[0], "concat");
  std::vector<std::size_t> ids;
  std::vector<std::size_t> extents;
  const std::size_t fixed = axis == 0 ? parts[0].value().cols() : parts[0].value().rows();
  std::size_t total = 0;
  for (const Var& p : parts) {
    tape_of(p, parts[0], "concat");
    if (p.value().rank() != 2) shape_fail("concat", "needs rank 2 operands, got " + shape_string(p.shape()));
    const std::size_t other = axis == 0 ? p.value().cols() : p.value().rows();
    if (other != fixed) shape_fail("concat", "operand " + shape_string(p.shape()) + " does not align");
    const std::size_t ext = axis == 0 ? p.value().rows() : p.value().cols();
    ids.push_back(p.id);
    extents.push_back(ext);
    total += ext;
  }
  const std::size_t rows = axis == 0 ? total : fixed;
  const std::size_t cols = axis == 0 ? fixed : total;
  Tensor v(Shape{rows, cols});
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& pv = parts[k].value();
    for (std::size_t r = 0; r < pv.rows(); ++r) {
      for (std::size_t c = 0; c < pv.cols(); ++c) {
        if (axis == 0) {
          v.at(offset + r, c) = pv.at(r, c);
        } else {
          v.at(r, offset + c) = pv.at(r, c);
        }
      }
    }
    offset += extents[k];
  }
  return t.record("concat", std::move(v), ids, [ids, extents, axis](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    std::size_t off = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (tp.wants_grad(ids[k])) {
        Tensor part(tp.value(ids[k]).shape());
        for (std::size_t r = 0; r < part.rows(); ++r) {
          for (std::size_t c = 0; c < part.cols(); ++c) {
            part.at(r, c) = axis == 0 ? g.at(off + r, c) : g.at(r, off + c);
          }
        }
        tp.accumulate(ids[k], part);
      }
      off += extents[k];
    }
  });
}

Var concat(std::initializer_list<Var> parts, std::size_t axis) {
  return concat(std::span<const Var>(parts.begin(), parts.size()), axis);
}

Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t end) {
  Tape& t = tape_of(a, "slice");
  const Tensor& av = a.value();
  if (av.rank() != 2 || axis > 1) shape_fail("slice", "needs rank 2 operand and axis 0/1");
  const std::size_t extent = axis == 0 ? av.rows() : av.cols();
  if (begin >= end || end > extent) {
    shape_fail("slice", "range [" + std::to_string(begin) + "," + std::to_string(end) + ") outside extent " +
                            std::to_string(extent));
  }
  const std::size_t rows = axis == 0 ? end - begin : av.rows();
  const std::size_t cols = axis == 1 ? end - begin : av.cols();
  const std::size_t r0 = axis == 0 ? begin : 0;
  const std::size_t c0 = axis == 1 ? begin : 0;
  Tensor v(Shape{rows, cols});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) v.at(r, c) = av.at(r0 + r, c0 + c);
  }
  const std::size_t ia = a.id;
  return t.record("slice", std::move(v), {ia}, [ia, r0, c0](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    Tensor& dst = tp.grad_slot(ia);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      for (std::size_t c = 0; c < g.cols(); ++c) dst.at(r0 + r, c0 + c) += g.at(r, c);
    }
  });
}

Var gather(Var a, std::vector<std::size_t> index, Shape out_shape) {
  Tape& t = tape_of(a, "gather");
  if (shape_size(out_shape) != index.size()) shape_fail("gather", "index count does not match output shape");
  const Tensor& av = a.value();
  Tensor v(out_shape);
  for (std::size_t k = 0; k < index.size(); ++k) {
    if (index[k] >= av.size()) shape_fail("gather", "index " + std::to_string(index[k]) + " out of range");
    v[k] = av[index[k]];
  }
  const std::size_t ia = a.id;
  return t.record("gather", std::move(v), {ia}, [ia, index = std::move(index)](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    Tensor& dst = tp.grad_slot(ia);
    for (std::size_t k = 0; k < index.size(); ++k) dst[index[k]] += g[k];
  });
}

// ---- reductions --------------------------------------------------------------

Var sum(Var a) {
  Tape& t = tape_of(a, "sum");
  double s = 0.0;
  for (double x : a.value().data()) s += x;
  const std::size_t ia = a.id;
  return t.record("sum", Tensor::scalar(s), {ia}, [ia](Tape& tp, std::size_t self) {
    tp.accumulate(ia, Tensor(tp.value(ia).shape(), tp.grad(self)[0]));
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) shape_fail("mean", "empty operand");
  return scale(sum(a), 1.0 / n);
}

Var max(Var a) {
  Tape& t = tape_of(a, "max");
  const Tensor& av = a.value();
  if (av.size() == 0) shape_fail("max", "empty operand");
  std::size_t best = 0;
  for (std::size_t i = 1; i < av.size(); ++i) {
    if (av[i] > av[best]) best = i;
  }
  const std::size_t ia = a.id;
  return t.record("max", Tensor::scalar(av[best]), {ia}, [ia, best](Tape& tp, std::size_t self) {
    tp.grad_slot(ia)[best] += tp.grad(self)[0];
  });
}

namespace {

void softmax_inplace(std::span<double> x) {
  const double m = *std::max_element(x.begin(), x.end());
  double z = 0.0;
  for (double& v : x) {
    v = std::exp(v - m);
    z += v;
  }
  for (double& v : x) v /= z;
}

// dx = y * (g - <g, y>) applied row by row.
void softmax_backprop(std::span<const double> y, std::span<const double> g, std::span<double> dx) {
  double dot = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) dot += g[i] * y[i];
  for (std::size_t i = 0; i < y.size(); ++i) dx[i] += y[i] * (g[i] - dot);
}

}  // namespace

Var softmax(Var a) {
  Tape& t = tape_of(a, "softmax");
  const Tensor& av = a.value();
  if (av.rank() == 2 && av.rows() != 1 && av.cols() != 1) {
    shape_fail("softmax", "expects a vector, got " + shape_string(av.shape()));
  }
  if (av.size() == 0) shape_fail("softmax", "empty operand");
  Tensor v = av;
  softmax_inplace(v.data());
  const std::size_t ia = a.id;
  return t.record("softmax", std::move(v), {ia}, [ia](Tape& tp, std::size_t self) {
    softmax_backprop(tp.value(self).data(), tp.grad(self).data(), tp.grad_slot(ia).data());
  });
}

Var softmax_rows(Var a) {
  Tape& t = tape_of(a, "softmax_rows");
  const Tensor& av = a.value();
  if (av.rank() != 2) shape_fail("softmax_rows", "expects rank 2, got " + shape_string(av.shape()));
  Tensor v = av;
  const std::size_t rows = v.rows(), cols = v.cols();
  for (std::size_t r = 0; r < rows; ++r) softmax_inplace(v.data().subspan(r * cols, cols));
  const std::size_t ia = a.id;
  return t.record("softmax_rows", std::move(v), {ia}, [ia, rows, cols](Tape& tp, std::size_t self) {
    const auto y = tp.value(self).data();
    const auto g = tp.grad(self).data();
    auto dx = tp.grad_slot(ia).data();
    for (std::size_t r = 0; r < rows; ++r) {
      softmax_backprop(y.subspan(r * cols, cols), g.subspan(r * cols, cols), dx.subspan(r * cols, cols));
    }
  });
}

// ---- finite differences ------------------------------------------------------

double finite_diff_check(const ValueFn& value, const GradFn& grad, const Tensor& point, double eps,
                         std::span<const std::size_t> coords) {
  if (!(eps > 0.0)) throw NumericError("finite_diff_check: eps must be positive");
  const Tensor analytic = grad(point);
  if (analytic.size() != point.size()) throw ShapeError("finite_diff_check: gradient shape differs from point");
  std::vector<std::size_t> all;
  if (coords.empty()) {
    all.resize(point.size());
    std::iota(all.begin(), all.end(), 0);
    coords = all;
  }
  double worst = 0.0;
  Tensor probe = point;
  for (std::size_t i : coords) {
    const double x0 = point[i];
    probe[i] = x0 + eps;
    const double up = value(probe);
    probe[i] = x0 - eps;
    const double down = value(probe);
    probe[i] = x0;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("finite_diff_check: non-finite evaluation at coordinate " + std::to_string(i));
    }
    const double numeric = (up - down) / (2.0 * eps);
    const double a = analytic[i];
    worst = std::max(worst, std::abs(a - numeric) / std::max(1.0, std::abs(a)));
  }
  return worst;
}

double finite_diff_check(const ScalarExpr& f, const Tensor& point, double eps, std::span<const std::size_t> coords) {
  auto value = [&](const Tensor& p) {
    Tape tape;
    return f(tape, tape.leaf(p)).value().item();
  };
  auto grad = [&](const Tensor& p) {
    Tape tape;
    Var x = tape.leaf(p);
    Var y = f(tape, x);
    tape.backward(y);
    return x.grad();
  };
  return finite_diff_check(value, grad, point, eps, coords);
}

}  // namespace bwsl::ad
