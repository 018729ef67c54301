#include "doctest.h"

#include "subreg/numerics.hpp"
#include "subreg/rng.hpp"

using namespace subreg;

TEST_SUITE("numerics") {

TEST_CASE("solve_linear identity and diagonal") {
  Matrix a = Matrix::Identity(3, 3);
  Vector b(3);
  b << 1, 2, 3;
  auto x = solve_linear(a, b);
  REQUIRE(x);
  CHECK((*x - b).norm() == doctest::Approx(0.0).epsilon(1e-14));

  Matrix d(2, 2);
  d << 2, 0, 0, 4;
  Vector rhs(2);
  rhs << 2, 8;
  auto y = solve_linear(d, rhs);
  REQUIRE(y);
  CHECK((*y)(0) == doctest::Approx(1.0));
  CHECK((*y)(1) == doctest::Approx(2.0));
}

TEST_CASE("solve_linear flags singular matrix") {
  Matrix a(2, 2);
  a << 1, 2, 2, 4;  // det = 0, rank 1
  Vector b(2);
  b << 1, 1;
  CHECK_FALSE(solve_linear(a, b));
}

TEST_CASE("solve_linear rejects dimension mismatch") {
  Matrix a = Matrix::Identity(2, 2);
  CHECK_THROWS_AS(solve_linear(a, Vector::Zero(3)), std::invalid_argument);
  CHECK_THROWS_AS(solve_linear(Matrix::Zero(2, 3), Vector::Zero(3)), std::invalid_argument);
}

TEST_CASE("solve_linear residual bound on random well-conditioned systems") {
  Rng rng(7);
  for (int trial = 0; trial < 1000; ++trial) {
    const Index n = 1 + static_cast<Index>(rng() % 8);
    Matrix a = random_matrix(rng, n, n) + 3.0 * Matrix::Identity(n, n) * ((rng() % 2) ? 1.0 : -1.0);
    // keep condition number moderate
    Eigen::JacobiSVD<Matrix> svd(a);
    if (svd.singularValues()(n - 1) < 1e-6 * svd.singularValues()(0)) continue;
    Vector b = random_matrix(rng, n, 1).col(0);
    auto x = solve_linear(a, b);
    REQUIRE(x);
    CHECK((a * *x - b).norm() <= 1e-10 * (1.0 + b.norm()));
  }
}

TEST_CASE("nullspace_basis single constraint") {
  Matrix a(1, 2);
  a << 1, 1;
  Matrix n = nullspace_basis(a);
  REQUIRE(n.cols() == 1);
  CHECK(std::abs(n(0, 0) + n(1, 0)) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(n.col(0).norm() == doctest::Approx(1.0));
}

TEST_CASE("nullspace_basis of identity is empty") {
  CHECK(nullspace_basis(Matrix::Identity(2, 2)).cols() == 0);
}

TEST_CASE("nullspace_basis orthonormal and annihilated") {
  Matrix a(1, 3);
  a << 1, 0, 0;
  Matrix n = nullspace_basis(a);
  REQUIRE(n.cols() == 2);
  CHECK((a * n).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((n.transpose() * n - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-10);

  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const Index rows = 1 + static_cast<Index>(rng() % 4);
    const Index cols = 1 + static_cast<Index>(rng() % 6);
    Matrix m = random_matrix(rng, rows, cols);
    Matrix ns = nullspace_basis(m);
    if (ns.cols() > 0) {
      CHECK((m * ns).cwiseAbs().maxCoeff() <= 1e-10);
      CHECK((ns.transpose() * ns - Matrix::Identity(ns.cols(), ns.cols())).cwiseAbs().maxCoeff() <= 1e-10);
    }
    CHECK(ns.cols() + numerical_rank(m) == cols);
  }
}

TEST_CASE("smallest_singular_value identity and harmonic diagonal") {
  auto s = smallest_singular_value(Matrix::Identity(4, 4));
  CHECK(s.value == doctest::Approx(1.0));

  const Index n = 6;
  Matrix d = Matrix::Zero(n, n);
  for (Index k = 0; k < n; ++k) d(k, k) = 1.0 / static_cast<double>(k + 1);
  auto t = smallest_singular_value(d);
  CHECK(t.value == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
  CHECK(std::abs(t.right(n - 1)) == doctest::Approx(1.0));
}

TEST_CASE("smallest_singular_value vs dense sampling on a random 5x3 matrix") {
  Rng rng(3);
  Matrix a = random_matrix(rng, 5, 3);
  auto s = smallest_singular_value(a);
  double best = kInf;
  for (int i = 0; i < 100000; ++i) best = std::min(best, (a * random_unit_sphere(rng, 3)).norm());
  CHECK(std::abs(best - s.value) <= 1e-3 * std::max(1.0, s.value));
  CHECK(best >= s.value - 1e-12);
  CHECK((a * s.right).norm() == doctest::Approx(s.value).epsilon(1e-9));
  CHECK((a * s.right - s.value * s.left).norm() <= 1e-9);
}

TEST_CASE("sigma_min squared equals lambda_min of AtA") {
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const Index rows = 3 + static_cast<Index>(rng() % 4);
    const Index cols = 1 + static_cast<Index>(rng() % rows);
    Matrix a = random_matrix(rng, rows, cols);
    auto s = smallest_singular_value(a);
    auto e = symmetric_eigen_extremes(Matrix(a.transpose() * a));
    const double lam = std::max(e.lambda_min, 0.0);
    CHECK(s.value * s.value == doctest::Approx(lam).epsilon(1e-8));
  }
}

TEST_CASE("symmetric_eigen_extremes basics") {
  Matrix d(2, 2);
  d << 2, 0, 0, 5;
  auto e = symmetric_eigen_extremes(d);
  CHECK(e.lambda_min == doctest::Approx(2.0));
  CHECK(std::abs(e.v_min(0)) == doctest::Approx(1.0));
  CHECK(e.lambda_max == doctest::Approx(5.0));

  Matrix m(2, 2);
  m << 2, 1, 1, 2;
  auto f = symmetric_eigen_extremes(m);
  CHECK(f.lambda_min == doctest::Approx(1.0));
  CHECK((m * f.v_min - f.lambda_min * f.v_min).norm() <= 1e-9);
  CHECK(std::abs(f.v_min(0) + f.v_min(1)) <= 1e-9);  // direction (1,-1)/sqrt2

  auto z = symmetric_eigen_extremes(Matrix::Zero(2, 2));
  CHECK(z.lambda_min == doctest::Approx(0.0));
  CHECK(z.lambda_max == doctest::Approx(0.0));
}

TEST_CASE("symmetric_eigen_extremes rejects non-symmetric input") {
  Matrix m(2, 2);
  m << 1, 2, 0, 1;
  CHECK_THROWS_AS(symmetric_eigen_extremes(m), std::invalid_argument);
}

TEST_CASE("rayleigh quotients match reported eigenvalues") {
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 2 + static_cast<Index>(rng() % 5);
    Matrix g = random_matrix(rng, n, n);
    Matrix a = 0.5 * (g + g.transpose());
    auto e = symmetric_eigen_extremes(a);
    CHECK(e.v_min.dot(a * e.v_min) == doctest::Approx(e.lambda_min).epsilon(1e-9));
    CHECK(e.v_max.dot(a * e.v_max) == doctest::Approx(e.lambda_max).epsilon(1e-9));
  }
}

}  // TEST_SUITE
