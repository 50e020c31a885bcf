#pragma once

// Reverse-mode automatic differentiation over dense double tensors.
//
// A Tape records every primitive applied to its variables in creation
// order, so the record list is already topologically sorted. backward()
// walks the records once from the root down to the first leaf.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace bwsl::ad {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

// Dense row-major tensor. Rank 0 is a scalar.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }
  static Tensor vector(std::vector<double> v);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t rows() const;  // extent of dim 0 for rank 2, 1 otherwise
  std::size_t cols() const;  // last extent, 1 for a scalar

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  double item() const;

  bool all_finite() const;
  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

class Tape;

// Handle to a value recorded on a tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Tensor& grad() const;
  const Shape& shape() const { return value().shape(); }
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = true);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  std::size_t size() const { return nodes_.size(); }
  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  // Zero-shaped like the value when backward never reached the node.
  const Tensor& grad(std::size_t id) const;
  const char* op_name(std::size_t id) const { return nodes_[id].op; }

  // Clears previous gradients, then propagates from a scalar root.
  void backward(Var root, double seed = 1.0);

  using Backprop = std::function<void(Tape&, std::size_t self)>;
  Var record(const char* op, Tensor value, std::vector<std::size_t> parents, Backprop backprop);

  // Accumulates g into the gradient of node id. Used by backprop closures.
  void accumulate(std::size_t id, const Tensor& g);
  void accumulate(std::size_t id, Tensor&& g);
  Tensor& grad_slot(std::size_t id);
  bool wants_grad(std::size_t id) const { return nodes_[id].requires_grad; }

 private:
  struct Node {
    const char* op;
    Tensor value;
    Tensor grad;
    bool grad_live = false;
    bool requires_grad = false;
    std::vector<std::size_t> parents;
    Backprop backprop;
  };
  std::vector<Node> nodes_;
  mutable std::vector<Tensor> zero_cache_;
};

// Elementwise with rank<=2 broadcasting (a dimension of extent 1 stretches).
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double k);
Var add_scalar(Var a, double k);
Var neg(Var a);

Var matmul(Var a, Var b);
Var transpose(Var a);
// axis 0 stacks rows, axis 1 stacks columns.
Var concat(std::span<const Var> parts, std::size_t axis);
Var concat(std::initializer_list<Var> parts, std::size_t axis);
Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t end);
// Flat gather: out[k] = a.flat[index[k]], output shape given.
Var gather(Var a, std::vector<std::size_t> index, Shape out_shape);

Var tanh(Var a);
Var sigmoid(Var a);
Var exp(Var a);
Var log(Var a);  // throws NumericError on x <= 0
Var sqrt(Var a);
Var square(Var a);

Var sum(Var a);
Var mean(Var a);
Var max(Var a);      // over all entries; first index wins ties
Var softmax(Var a);  // over all entries of a vector
Var softmax_rows(Var a);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }

// Max over coordinates of |analytic - central difference| / max(1, |analytic|).
// An empty coordinate list checks every coordinate.
using ValueFn = std::function<double(const Tensor&)>;
using GradFn = std::function<Tensor(const Tensor&)>;
double finite_diff_check(const ValueFn& value, const GradFn& grad, const Tensor& point, double eps,
                         std::span<const std::size_t> coords = {});

using ScalarExpr = std::function<Var(Tape&, Var)>;
double finite_diff_check(const ScalarExpr& f, const Tensor& point, double eps,
                         std::span<const std::size_t> coords = {});

}  // namespace bwsl::ad
