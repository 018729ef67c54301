#include "doctest.h"

#include "subreg/geq.hpp"
#include "subreg/rng.hpp"

using namespace subreg;

namespace {

SmoothMap scalar_map(std::function<double(double)> f, std::function<double(double)> df = {}) {
  SmoothMap m;
  m.dim_in = m.dim_out = 1;
  m.eval = [f](const Vector& x) { return Vector::Constant(1, f(x(0))); };
  if (df) m.jac = [df](const Vector& x) { return Matrix::Constant(1, 1, df(x(0))); };
  return m;
}

}  // namespace

TEST_SUITE("geq") {

TEST_CASE("construction verifies the reference inclusion") {
  auto ge = make_generalized_equation(identity_map(1), ZeroMap{}, Vector::Zero(1));
  CHECK(residual_distance(ge, *ge.reference_point) == doctest::Approx(0.0));
  CHECK_THROWS_AS(make_generalized_equation(identity_map(1), ZeroMap{}, Vector::Ones(1)),
                  std::invalid_argument);
}

TEST_CASE("residual for identity with zero part") {
  auto ge = make_generalized_equation(identity_map(1), ZeroMap{}, Vector::Zero(1));
  CHECK(residual_distance(ge, Vector::Constant(1, 0.3)) == doctest::Approx(0.3));
}

TEST_CASE("residual for the two-selection fixture |x|") {
  // F(x) = {-x, x}, f = 0, ybar = 0: d(0, F(x)) = |x|
  FiniteSelection sel;
  sel.maps = {linear_map(Matrix::Constant(1, 1, -1.0)), linear_map(Matrix::Constant(1, 1, 1.0))};
  auto ge = make_generalized_equation(zero_map(1, 1), sel, Vector::Zero(1));
  CHECK(residual_distance(ge, Vector::Constant(1, 0.4)) == doctest::Approx(0.4));
  CHECK(residual_distance(ge, Vector::Constant(1, -0.25)) == doctest::Approx(0.25));
}

TEST_CASE("residual for the isolated-points graph") {
  ExplicitGraph g;
  g.points.emplace_back(Vector::Zero(1), Vector::Zero(1));
  for (int k = 1; k <= 50; ++k)
    g.points.emplace_back(Vector::Constant(1, 1.0 / k), Vector::Zero(1));
  auto ge = make_generalized_equation(zero_map(1, 1), g, Vector::Zero(1));
  CHECK(residual_distance(ge, Vector::Constant(1, 1.0 / 5)) == doctest::Approx(0.0));
  CHECK(residual_distance(ge, Vector::Constant(1, 0.123)) == kInf);
}

TEST_CASE("residual vanishes at the reference point for assorted parts") {
  Rng rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix a = random_matrix(rng, 2, 2) + 3.0 * Matrix::Identity(2, 2);
    Vector xbar = random_matrix(rng, 2, 1).col(0);
    auto ge = make_generalized_equation(affine_map(a, Vector(-a * xbar)), ZeroMap{}, xbar);
    CHECK(residual_distance(ge, xbar) <= 1e-12);
  }
  Box box{Vector::Zero(2), Vector::Ones(2)};
  auto ge_box = make_generalized_equation(zero_map(2, 2), BoxNormalCone{box}, Vector::Constant(2, 0.5));
  CHECK(residual_distance(ge_box, *ge_box.reference_point) <= 1e-12);
}

TEST_CASE("natural map basics") {
  Box box{Vector::Zero(1), Vector::Ones(1)};
  auto interior = make_generalized_equation(zero_map(1, 1), BoxNormalCone{box}, Vector::Constant(1, 0.5));
  CHECK(natural_map(interior, Vector::Constant(1, 0.5)).cwiseAbs().maxCoeff() <= 1e-12);

  // f(x) = x - 1 on [0, inf): solution x = 1
  Box ray{Vector::Zero(1), Vector::Constant(1, kInf)};
  auto ge = make_generalized_equation(scalar_map([](double x) { return x - 1; }, [](double) { return 1.0; }),
                                      BoxNormalCone{ray}, Vector::Ones(1));
  CHECK(natural_map(ge, Vector::Ones(1)).cwiseAbs().maxCoeff() <= 1e-12);

  // f(x) = x + 2 on [0, inf): solution x = 0 since P(0 - 2) = 0
  auto ge2 = make_generalized_equation(scalar_map([](double x) { return x + 2; }, [](double) { return 1.0; }),
                                       BoxNormalCone{ray}, Vector::Zero(1));
  CHECK(natural_map(ge2, Vector::Zero(1)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("natural map zero set equals GE solution set on grids") {
  Box box{Vector::Constant(1, -1.0), Vector::Constant(1, 1.0)};
  auto ge = make_generalized_equation(scalar_map([](double x) { return x + 2; }, [](double) { return 1.0; }),
                                      BoxNormalCone{box}, Vector::Constant(1, -1.0));
  for (int i = 0; i <= 1000; ++i) {
    const double x = -1.5 + 3.0 * i / 1000.0;
    const Vector xv = Vector::Constant(1, x);
    const bool phi_zero = natural_map(ge, xv).cwiseAbs().maxCoeff() <= 1e-9;
    const bool ge_zero = box.contains(xv, 0.0) && residual_distance(ge, xv) <= 1e-9;
    CHECK(phi_zero == ge_zero);
  }

  Box box2{Vector::Zero(2), Vector::Ones(2)};
  Matrix a(2, 2);
  a << 2, 1, 0, 1;
  Vector b(2);
  b << -1, 1;
  auto ge2 = make_generalized_equation(affine_map(a, b), BoxNormalCone{box2},
                                       [] {
                                         Vector v(2);
                                         v << 0.5, 0.0;
                                         return v;
                                       }());
  for (int i = 0; i <= 31; ++i)
    for (int j = 0; j <= 31; ++j) {
      Vector x(2);
      x << -0.2 + 1.4 * i / 31.0, -0.2 + 1.4 * j / 31.0;
      const bool phi_zero = natural_map(ge2, x).cwiseAbs().maxCoeff() <= 1e-9;
      const bool ge_zero = box2.contains(x, 0.0) && residual_distance(ge2, x) <= 1e-9;
      CHECK(phi_zero == ge_zero);
    }
}

TEST_CASE("b-jacobian selects smooth and clamped rows") {
  Box box{Vector::Zero(2), Vector::Ones(2)};
  Matrix a(2, 2);
  a << 3, 1, -1, 2;
  // pick xbar solving the inclusion: interior fixed point of f = 0 shifted
  auto ge = make_generalized_equation(affine_map(a, Vector(-a * Vector::Constant(2, 0.5))),
                                      BoxNormalCone{box}, Vector::Constant(2, 0.5));

  // all z strictly interior -> Jf
  Vector x_in = Vector::Constant(2, 0.5);
  CHECK((b_jacobian_natural_map(ge, x_in) - a).cwiseAbs().maxCoeff() <= 1e-12);

  // all z strictly outside -> I
  Vector x_out(2);
  x_out << 5.0, -4.0;
  const Vector z = x_out - (ge.smooth(x_out) - ge.reference_value);
  REQUIRE((z(0) > 1.0 || z(0) < 0.0));
  REQUIRE((z(1) > 1.0 || z(1) < 0.0));
  CHECK((b_jacobian_natural_map(ge, x_out) - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("b-jacobian rows match forward differences of the natural map") {
  Box box{Vector::Zero(2), Vector::Ones(2)};
  Matrix a(2, 2);
  a << 2, 0.5, -0.3, 1.5;
  Vector off(2);
  off << -0.2, 4.0;  // mixed: one coordinate clamps, one stays smooth
  Vector xbar(2);
  xbar << 0.35, 1.0;  // f_2(xbar) = -0.105 + 1.5 + 4 > 0 pushes against upper bound
  // make xbar feasible for the inclusion by adjusting: use no reference
  GeneralizedEquation ge;
  ge.smooth = affine_map(a, off);
  ge.set_part = BoxNormalCone{box};
  ge.reference_value = Vector::Zero(2);

  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    Vector x = random_matrix(rng, 2, 1).col(0);
    const Vector z = x - ge.smooth(x);
    bool near_kink = false;
    for (Index i = 0; i < 2; ++i)
      if (std::abs(z(i)) < 1e-6 || std::abs(z(i) - 1.0) < 1e-6) near_kink = true;
    if (near_kink) continue;
    const Matrix bj = b_jacobian_natural_map(ge, x);
    const Matrix fd = fd_jacobian([&](const Vector& v) { return natural_map(ge, v); }, x, 2);
    CHECK((bj - fd).cwiseAbs().maxCoeff() <= 1e-5);
  }
}

TEST_CASE("avi_solve trivial and complementarity cases") {
  // M = I, q = -1, free: z = 1
  auto z1 = avi_solve(Matrix::Identity(1, 1), Vector::Constant(1, -1.0), ZeroMap{}, Vector::Zero(1));
  REQUIRE(z1);
  CHECK((*z1)(0) == doctest::Approx(1.0));

  // M = 1, q = 1, C = R+: z = 0 with w = 1 >= 0
  Box ray{Vector::Zero(1), Vector::Constant(1, kInf)};
  auto z2 = avi_solve(Matrix::Identity(1, 1), Vector::Ones(1), BoxNormalCone{ray}, Vector::Zero(1));
  REQUIRE(z2);
  CHECK((*z2)(0) == doctest::Approx(0.0));
}

TEST_CASE("avi_solve substituted back satisfies the inclusion") {
  Rng rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    const Index n = 1 + static_cast<Index>(rng() % 4);
    Matrix m = random_matrix(rng, n, n) + 2.5 * Matrix::Identity(n, n);
    Vector q = random_matrix(rng, n, 1).col(0);
    Box box{Vector::Zero(n), Vector::Ones(n)};
    auto z = avi_solve(m, q, BoxNormalCone{box}, Vector::Zero(n));
    if (!z) continue;  // strongly monotone M should always solve, but guard
    GeneralizedEquation ge;
    ge.smooth = affine_map(m, q);
    ge.set_part = BoxNormalCone{box};
    ge.reference_value = Vector::Zero(n);
    CHECK(residual_distance(ge, *z) <= 1e-9);
  }
}

TEST_CASE("avi_solve returns the solution nearest to the probe") {
  // M = 0, q = 0 on box [0,1]: every z in [0,1] with w = 0 solves; the
  // pattern machinery returns box faces; nearest to 0.9 must be picked
  Box box{Vector::Zero(1), Vector::Ones(1)};
  auto z = avi_solve(Matrix::Zero(1, 1), Vector::Zero(1), BoxNormalCone{box}, Vector::Constant(1, 0.9));
  REQUIRE(z);
  CHECK((*z)(0) == doctest::Approx(0.9));
}

TEST_CASE("avi_solve reports no-solution") {
  // 0 in 1 + 0*z + N_R(z) has no solution (w must be 0)
  auto z = avi_solve(Matrix::Zero(1, 1), Vector::Ones(1), ZeroMap{}, Vector::Zero(1));
  CHECK_FALSE(z);
}

TEST_CASE("kkt cone box layout") {
  // product dim 3 = n(1) + m(2), s = 1: coords (x, y1 free, y2 >= 0)
  Box b = set_part_box(KktCone{1, 2}, 3);
  CHECK(b.lower(0) == -kInf);
  CHECK(b.lower(1) == -kInf);
  CHECK(b.lower(2) == 0.0);
  CHECK(b.upper(2) == kInf);
}

TEST_CASE("constant polyhedron part measures distance to the set") {
  // F(x) = R_-^1 constant: residual of f(x) = x at ybar = 0 is dist(-x, R_-)
  Polyhedron nonpos = Polyhedron::whole_space(1);
  nonpos.ineq_A = Matrix::Identity(1, 1);
  nonpos.ineq_b = Vector::Zero(1);
  auto ge = make_generalized_equation(identity_map(1), ConstantPolyhedron{nonpos}, Vector::Zero(1));
  CHECK(residual_distance(ge, Vector::Constant(1, 2.0)) == doctest::Approx(0.0));   // -2 in R_-
  CHECK(residual_distance(ge, Vector::Constant(1, -2.0)) == doctest::Approx(2.0));  // dist(2, R_-)
}

}  // TEST_SUITE
