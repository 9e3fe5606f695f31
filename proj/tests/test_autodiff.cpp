#include <doctest.h>

#include <cmath>
#include <random>

#include "pinnflow/autodiff.hpp"

using namespace pinnflow;
using ad::Tape;
using ad::Var;

namespace {

Eigen::VectorXd random_point(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x(i) = u(rng);
  return x;
}

}  // namespace

TEST_SUITE("autodiff") {
  TEST_CASE("scalar polynomial gradient is exact") {
    Tape t;
    const Var x = t.variable(3.0);
    const Var y = x * x * x - 2.0 * x + 1.0;  // 3x^2 - 2
    t.backward(y);
    CHECK(y.scalar() == 22.0);
    CHECK(t.grad(x)(0, 0) == 25.0);
  }

  TEST_CASE("shared subexpressions accumulate") {
    Tape t;
    const Var x = t.variable(2.0);
    const Var a = x * x;
    const Var y = a + a * x;  // x^2 + x^3
    ad::backward(y);
    CHECK(t.grad(x)(0, 0) == doctest::Approx(2 * 2.0 + 3 * 4.0));
  }

  TEST_CASE("polynomial unit functions match central differences") {
    std::mt19937_64 rng(3);
    const auto poly = [](Tape&, const Var& x) {
      const Var x0 = ad::rows(x, {0}), x1 = ad::rows(x, {1}), x2 = ad::rows(x, {2});
      return ad::sum(x0 * x0 * x1 - 3.0 * x1 * x2 + x2 * x2 * x2 + 0.5 * x0);
    };
    const auto quad = [](Tape& t, const Var& x) {
      Eigen::MatrixXd a(3, 3);
      a << 2, 1, 0, 1, 3, -1, 0, -1, 4;
      return ad::sum(x * ad::matmul(t.constant(a), x));
    };
    for (int k = 0; k < 20; ++k) {
      const Eigen::VectorXd p = random_point(rng, 3);
      CHECK(ad::finite_difference_check(poly, p, 1e-5) <= 1e-8);
      CHECK(ad::finite_difference_check(quad, p, 1e-4) <= 1e-8);
    }
  }

  TEST_CASE("elementwise transcendental ops") {
    std::mt19937_64 rng(4);
    const auto f = [](Tape&, const Var& x) {
      return ad::sum(ad::tanh(x) * ad::sin(x) + ad::cos(2.0 * x) - ad::square(x - 0.3));
    };
    for (int k = 0; k < 20; ++k) CHECK(ad::finite_difference_check(f, random_point(rng, 5), 1e-6) <= 1e-6);
  }

  TEST_CASE("matrix ops: matmul, add_row, broadcast, slice, rows, sparse") {
    std::mt19937_64 rng(9);
    Eigen::SparseMatrix<double> s(3, 3);
    s.insert(0, 1) = 1.0;
    s.insert(1, 0) = 1.0;
    s.insert(1, 2) = 2.0;
    s.insert(2, 1) = -1.0;
    const auto f = [&](Tape& t, const Var& x) {
      // x packs a 3x2 input block, a 2x2 weight and a 1x2 bias.
      const Var in = ad::slice(x, 0, 3, 2);
      const Var w = ad::slice(x, 6, 2, 2);
      const Var b = ad::slice(x, 10, 1, 2);
      const int sid = t.add_sparse(s);
      const Var h = ad::tanh(ad::add_row(ad::matmul(in, w) + ad::sparse_matmul(sid, in), b));
      const Var scale = ad::rows(x, {11});
      return ad::mean(scale * h * h) + ad::sum(ad::column(h, 1));
    };
    for (int k = 0; k < 20; ++k) CHECK(ad::finite_difference_check(f, random_point(rng, 12), 1e-6) <= 1e-6);
  }

  TEST_CASE("value semantics") {
    Tape t;
    Eigen::MatrixXd a(2, 2);
    a << 1, 2, 3, 4;
    const Var x = t.variable(a);
    CHECK(ad::sum(x).scalar() == 10.0);
    CHECK(ad::mean(x).scalar() == 2.5);
    CHECK(ad::column(x, 1).value() == Eigen::Vector2d(2, 4));
    CHECK(ad::rows(x, {1, 1}).value().row(0) == a.row(1));
    CHECK((x * 2.0).value() == 2.0 * a);
    CHECK((t.variable(2.0) * x).value() == 2.0 * a);
    CHECK((1.0 - x).value() == (1.0 - a.array()).matrix());
  }

  TEST_CASE("error contracts") {
    Tape t, other;
    const Var x = t.variable(1.0);
    CHECK_THROWS_AS(other.backward(x), ad::NotOnTape);
    CHECK_THROWS_AS(t.backward(Var{}), ad::NotOnTape);
    const Var m = t.variable(Eigen::MatrixXd::Ones(2, 2));
    CHECK_THROWS_AS(t.backward(m), DimensionMismatch);
    CHECK_THROWS_AS(ad::matmul(m, t.variable(Eigen::MatrixXd::Ones(3, 1))), DimensionMismatch);
    CHECK_THROWS_AS(
        ad::finite_difference_check([](Tape&, const Var& v) { return ad::sum(v); }, Eigen::VectorXd::Ones(2), 0.0),
        PreconditionError);
  }

  TEST_CASE("unreached nodes have zero gradient") {
    Tape t;
    const Var x = t.variable(1.0);
    const Var y = t.variable(Eigen::MatrixXd::Ones(2, 3));
    t.backward(x * 3.0);
    CHECK(t.grad(y).isZero());
    CHECK(t.grad(y).rows() == 2);
  }
}
