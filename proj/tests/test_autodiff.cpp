#include <doctest.h>

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "bwsl/autodiff.hpp"
#include "bwsl/errors.hpp"
#include "helpers.hpp"

using namespace bwsl;
using namespace bwsl::ad;

namespace {

// Reduces any output to a scalar with fixed pseudo-random weights so every
// output coordinate contributes to the checked gradient.
Var weighted_total(Tape& tape, Var y) {
  Rng rng(99);
  Tensor w = testing::random_tensor(y.shape(), rng, 0.5, 1.5);
  return sum(mul(y, tape.constant(std::move(w))));
}

struct Case {
  std::string name;
  Shape shape;
  double lo, hi;
  std::function<Var(Tape&, Var)> op;
};

std::vector<Case> primitive_cases() {
  Rng rng(5);
  const Tensor other = testing::random_tensor({3, 4}, rng);
  const Tensor row = testing::random_tensor({1, 4}, rng);
  const Tensor right = testing::random_tensor({4, 2}, rng);
  auto c = [](Tape& t, const Tensor& v) { return t.constant(v); };
  return {
      {"add", {3, 4}, -1, 1, [=](Tape& t, Var x) { return add(x, c(t, other)); }},
      {"add_broadcast", {1, 4}, -1, 1, [=](Tape& t, Var x) { return add(c(t, other), x); }},
      {"sub", {3, 4}, -1, 1, [=](Tape& t, Var x) { return sub(c(t, other), x); }},
      {"mul", {3, 4}, -1, 1, [=](Tape& t, Var x) { return mul(x, x); }},
      {"mul_broadcast", {1, 4}, -1, 1, [=](Tape& t, Var x) { return mul(c(t, other), x); }},
      {"scale", {3, 4}, -1, 1, [](Tape&, Var x) { return scale(x, -2.5); }},
      {"add_scalar", {3, 4}, -1, 1, [](Tape&, Var x) { return square(add_scalar(x, 0.3)); }},
      {"neg", {3, 4}, -1, 1, [](Tape&, Var x) { return neg(x); }},
      {"matmul_left", {3, 4}, -1, 1, [=](Tape& t, Var x) { return matmul(x, c(t, right)); }},
      {"matmul_right", {4, 2}, -1, 1, [=](Tape& t, Var x) { return matmul(c(t, other), x); }},
      {"transpose", {3, 4}, -1, 1, [=](Tape& t, Var x) { return matmul(transpose(x), c(t, other)); }},
      {"concat_rows", {1, 4}, -1, 1, [=](Tape& t, Var x) { return concat({x, c(t, row), x}, 0); }},
      {"concat_cols", {3, 4}, -1, 1, [=](Tape& t, Var x) { return concat({c(t, other), x}, 1); }},
      {"slice_rows", {3, 4}, -1, 1, [](Tape&, Var x) { return slice(x, 0, 1, 3); }},
      {"slice_cols", {3, 4}, -1, 1, [](Tape&, Var x) { return slice(x, 1, 1, 2); }},
      {"gather", {3, 4}, -1, 1, [](Tape&, Var x) { return gather(x, {0, 5, 5, 11}, Shape{2, 2}); }},
      {"tanh", {3, 4}, -2, 2, [](Tape&, Var x) { return ad::tanh(x); }},
      {"sigmoid", {3, 4}, -3, 3, [](Tape&, Var x) { return sigmoid(x); }},
      {"exp", {3, 4}, -1, 1, [](Tape&, Var x) { return ad::exp(x); }},
      {"log", {3, 4}, 0.2, 3, [](Tape&, Var x) { return ad::log(x); }},
      {"sqrt", {3, 4}, 0.2, 3, [](Tape&, Var x) { return ad::sqrt(x); }},
      {"square", {3, 4}, -1, 1, [](Tape&, Var x) { return square(x); }},
      {"sum", {3, 4}, -1, 1, [](Tape&, Var x) { return square(sum(x)); }},
      {"mean", {3, 4}, -1, 1, [](Tape&, Var x) { return square(mean(x)); }},
      {"max", {3, 4}, -1, 1, [](Tape&, Var x) { return max(x); }},
      {"softmax", {5}, -2, 2, [](Tape&, Var x) { return softmax(x); }},
      {"softmax_rows", {3, 4}, -2, 2, [](Tape&, Var x) { return softmax_rows(x); }},
  };
}

}  // namespace

TEST_SUITE("autodiff") {
  TEST_CASE("identity composition records one node and returns the input") {
    Tape tape;
    const Tensor x = Tensor::vector({1.5, -2.0});
    Var v = tape.leaf(x);
    CHECK(v.value() == x);
    CHECK(tape.size() == 1);
  }

  TEST_CASE("sum of a 3-vector") {
    Tape tape;
    CHECK(sum(tape.leaf(Tensor::vector({1, 2, 3}))).value().item() == 6.0);
  }

  TEST_CASE("random five-op chain matches direct evaluation") {
    Rng rng(11);
    const Tensor x = testing::random_tensor({2, 3}, rng);
    const Tensor w = testing::random_tensor({3, 2}, rng);
    Tape tape;
    Var y = sum(ad::exp(scale(ad::tanh(matmul(tape.leaf(x), tape.leaf(w))), 0.5)) * tape.constant(Tensor::scalar(2.0)));
    double expect = 0.0;
    for (std::size_t r = 0; r < 2; ++r) {
      for (std::size_t c = 0; c < 2; ++c) {
        double acc = 0.0;
        for (std::size_t k = 0; k < 3; ++k) acc += x.at(r, k) * w.at(k, c);
        expect += 2.0 * std::exp(0.5 * std::tanh(acc));
      }
    }
    CHECK(std::abs(y.value().item() - expect) <= 1e-12 * std::abs(expect));
  }

  TEST_CASE("gradient of identity is one") {
    Tape tape;
    Var x = tape.leaf(Tensor::scalar(7.0));
    tape.backward(x);
    CHECK(x.grad().item() == 1.0);
  }

  TEST_CASE("gradient of sum of squares") {
    Tape tape;
    Var x = tape.leaf(Tensor::vector({1, 2}));
    tape.backward(sum(x * x));
    CHECK(x.grad()[0] == 2.0);
    CHECK(x.grad()[1] == 4.0);
  }

  TEST_CASE("every primitive matches central differences at 100 random points") {
    for (const Case& pc : primitive_cases()) {
      CAPTURE(pc.name);
      Rng rng(fnv1a64(pc.name));
      double worst = 0.0;
      for (int trial = 0; trial < 100; ++trial) {
        const Tensor point = testing::random_tensor(pc.shape, rng, pc.lo, pc.hi);
        const double err = finite_diff_check(
            [&](Tape& t, Var x) { return weighted_total(t, pc.op(t, x)); }, point, 1e-6);
        worst = std::max(worst, err);
      }
      CHECK(worst <= 1e-4);
    }
  }

  TEST_CASE("finite differences are exact for a linear function") {
    Rng rng(3);
    const Tensor point = testing::random_tensor({4}, rng);
    const Tensor c = testing::random_tensor({4}, rng);
    const double err = finite_diff_check([&](Tape& t, Var x) { return sum(x * t.constant(c)); }, point, 1e-5);
    CHECK(err <= 1e-8);
  }

  TEST_CASE("sigmoid slope at zero is a quarter") {
    Tape tape;
    Var x = tape.leaf(Tensor::scalar(0.0));
    tape.backward(sigmoid(x));
    CHECK(std::abs(x.grad().item() - 0.25) <= 1e-6);
    const double err = finite_diff_check([](Tape&, Var v) { return sigmoid(v); }, Tensor::scalar(0.0), 1e-5);
    CHECK(err <= 1e-6);
  }

  TEST_CASE("log of a non-positive value is an error") {
    Tape tape;
    CHECK_THROWS_AS(ad::log(tape.leaf(Tensor::vector({1.0, 0.0}))), NumericError);
    CHECK_THROWS_AS(ad::log(tape.leaf(Tensor::scalar(-2.0))), NumericError);
  }

  TEST_CASE("max sends the whole gradient to the first maximal entry") {
    Tape tape;
    Var x = tape.leaf(Tensor::vector({1.0, 3.0, 3.0, 2.0}));
    tape.backward(max(x));
    const std::vector<double> expect{0, 1, 0, 0};
    for (std::size_t i = 0; i < 4; ++i) CHECK(x.grad()[i] == expect[i]);
  }

  TEST_CASE("repeated backward passes give bitwise identical gradients") {
    Rng rng(8);
    Tape tape;
    Var x = tape.leaf(testing::random_tensor({3, 3}, rng));
    Var y = sum(softmax_rows(matmul(x, transpose(x))) * x);
    tape.backward(y);
    const Tensor first = x.grad();
    tape.backward(y);
    CHECK(x.grad() == first);
  }

  TEST_CASE("softmax outputs are a distribution") {
    Tape tape;
    Var s = softmax(tape.leaf(Tensor::vector({1000.0, 999.0, -5.0})));
    double total = 0.0;
    for (double v : s.value().data()) total += v;
    CHECK(std::abs(total - 1.0) <= 1e-15);
    Var rows = softmax_rows(tape.leaf(Tensor::matrix(2, 2, {0, 0, 1, 3})));
    CHECK(rows.value().at(0, 0) == doctest::Approx(0.5));
    CHECK(rows.value().at(1, 0) + rows.value().at(1, 1) == doctest::Approx(1.0));
  }

  TEST_CASE("shape errors") {
    Tape tape;
    Var a = tape.leaf(Tensor({2, 3}));
    Var b = tape.leaf(Tensor({2, 3}));
    CHECK_THROWS_AS(matmul(a, b), ShapeError);
    CHECK_THROWS_AS(add(a, tape.leaf(Tensor({3, 2}))), ShapeError);
    CHECK_THROWS_AS(slice(a, 1, 2, 5), ShapeError);
    CHECK_THROWS_AS(softmax(a), ShapeError);
    CHECK_THROWS_AS(tape.backward(a), ShapeError);
    CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
  }

  TEST_CASE("constants receive no gradient") {
    Tape tape;
    Var c = tape.constant(Tensor::vector({1, 2}));
    Var x = tape.leaf(Tensor::vector({3, 4}));
    tape.backward(sum(c * x));
    CHECK(c.grad()[0] == 0.0);
    CHECK(x.grad()[1] == 2.0);
  }

  TEST_CASE("non-positive step for finite differences is rejected") {
    CHECK_THROWS(finite_diff_check([](Tape&, Var x) { return sum(x); }, Tensor::vector({1.0}), 0.0));
  }
}
