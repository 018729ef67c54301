#include "doctest.h"

#include "subreg/polyhedral.hpp"
#include "subreg/rng.hpp"

#include <set>

using namespace subreg;

namespace {

Polyhedron simplex_like()  // {x1+x2 <= 1, x >= 0}
{
  Polyhedron p = Polyhedron::whole_space(2);
  p.ineq_A.resize(3, 2);
  p.ineq_A << 1, 1, -1, 0, 0, -1;
  p.ineq_b.resize(3);
  p.ineq_b << 1, 0, 0;
  return p;
}

}  // namespace

TEST_SUITE("polyhedral") {

TEST_CASE("project_box clamps componentwise") {
  Box b{Vector::Zero(1), Vector::Ones(1)};
  CHECK(project_box(Vector::Constant(1, 0.5), b)(0) == doctest::Approx(0.5));
  CHECK(project_box(Vector::Constant(1, 0.0), b)(0) == doctest::Approx(0.0));

  Box b2{Vector::Zero(2), Vector::Ones(2)};
  Vector x(2);
  x << 2, -3;
  Vector px = project_box(x, b2);
  CHECK(px(0) == doctest::Approx(1.0));
  CHECK(px(1) == doctest::Approx(0.0));
}

TEST_CASE("project_polyhedron interior point is fixed") {
  Polyhedron p = simplex_like();
  Vector x(2);
  x << 0.2, 0.2;
  CHECK((project_polyhedron(x, p) - x).norm() <= 1e-12);
}

TEST_CASE("project_polyhedron halfspace") {
  Polyhedron p = Polyhedron::whole_space(2);
  p.ineq_A.resize(1, 2);
  p.ineq_A << 1, 0;
  p.ineq_b = Vector::Ones(1);
  Vector x(2);
  x << 2, 0;
  Vector z = project_polyhedron(x, p);
  CHECK(z(0) == doctest::Approx(1.0));
  CHECK(z(1) == doctest::Approx(0.0));
}

TEST_CASE("project_polyhedron simplex corner vs grid oracle") {
  Polyhedron p = simplex_like();
  Vector x(2);
  x << 1, 1;
  Vector z = project_polyhedron(x, p);
  CHECK(z(0) == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(z(1) == doctest::Approx(0.5).epsilon(1e-10));

  // dense grid oracle at resolution 1e-3
  double best = kInf;
  Vector bestpt(2);
  for (double a = 0.0; a <= 1.0 + 1e-12; a += 1e-3)
    for (double b = 0.0; b <= 1.0 - a + 1e-12; b += 1e-3) {
      Vector pt(2);
      pt << a, b;
      const double d = (pt - x).norm();
      if (d < best) {
        best = d;
        bestpt = pt;
      }
    }
  CHECK((z - bestpt).norm() <= 2e-3);
}

TEST_CASE("projection idempotence on random feasible polyhedra") {
  Rng rng(21);
  for (int trial = 0; trial < 40; ++trial) {
    const Index n = 1 + static_cast<Index>(rng() % 3);
    Polyhedron p = Polyhedron::whole_space(n);
    const Index m = 1 + static_cast<Index>(rng() % 4);
    p.ineq_A = random_matrix(rng, m, n);
    // keep 0 feasible so P is nonempty
    p.ineq_b = Vector::Ones(m) * 0.5;
    Vector x = random_matrix(rng, n, 1).col(0) * 3.0;
    Vector z = project_polyhedron(x, p);
    CHECK((project_polyhedron(z, p) - z).norm() <= 1e-12);
    CHECK(p.contains(z, 1e-8));
  }
}

TEST_CASE("project_polyhedron detects infeasibility") {
  Polyhedron p = Polyhedron::whole_space(1);
  p.ineq_A.resize(2, 1);
  p.ineq_A << 1, -1;
  p.ineq_b.resize(2);
  p.ineq_b << -1, -1;  // x <= -1 and x >= 1
  CHECK_THROWS_AS(project_polyhedron(Vector::Zero(1), p), std::runtime_error);
}

TEST_CASE("normal_cone_at free space is trivial") {
  Polyhedron p = Polyhedron::whole_space(2);
  auto cone = normal_cone_at(p, Vector::Zero(2));
  REQUIRE(cone);
  CHECK(cone->conic.cols() == 0);
  CHECK(cone->lin.cols() == 0);
}

TEST_CASE("normal cone of R+ at 0 is R-") {
  Polyhedron p = Polyhedron::nonneg_orthant(1);
  auto cone = normal_cone_at(p, Vector::Zero(1));
  REQUIRE(cone);
  REQUIRE(cone->conic.cols() == 1);
  CHECK(cone->conic(0, 0) == doctest::Approx(-1.0));
  CHECK_FALSE(normal_cone_at(p, Vector::Constant(1, -1.0)));
}

TEST_CASE("normal cone at simplex vertex and polarity spot-check") {
  Polyhedron p = simplex_like();
  Vector x(2);
  x << 1, 0;
  auto cone = normal_cone_at(p, x);
  REQUIRE(cone);
  REQUIRE(cone->conic.cols() == 2);  // generated by (1,1) and (0,-1)

  // polarity against sampled tangent directions
  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    Vector d = random_unit_sphere(rng, 2);
    // move inside along d if feasible for small t
    const double t = 1e-6;
    if (!p.contains(x + t * d, 1e-12)) continue;
    for (Index j = 0; j < cone->conic.cols(); ++j) CHECK(cone->conic.col(j).dot(d) <= 1e-8);
  }
}

TEST_CASE("critical_cone trivial cases") {
  Polyhedron free2 = Polyhedron::whole_space(2);
  PolyhedralCone k = critical_cone(free2, Vector::Zero(2), Vector::Zero(2));
  CHECK(k.ineq_A.rows() == 0);
  CHECK(k.eq_A.rows() == 0);

  Polyhedron rplus = Polyhedron::nonneg_orthant(1);
  PolyhedralCone k2 = critical_cone(rplus, Vector::Zero(1), Vector::Zero(1));
  CHECK(k2.ineq_A.rows() == 1);  // K = R+
  CHECK(k2.eq_A.rows() == 0);
}

TEST_CASE("critical_cone of orthant with active normal") {
  Polyhedron p = Polyhedron::nonneg_orthant(2);
  Vector x = Vector::Zero(2);
  Vector v(2);
  v << -1, 0;
  PolyhedralCone k = critical_cone(p, x, v);
  // K = {x1 = 0, x2 >= 0}; verify by definition on sampled directions
  Rng rng(9);
  for (int i = 0; i < 200; ++i) {
    Vector d = random_unit_sphere(rng, 2);
    const bool in_k = k.as_polyhedron().contains(d, 1e-10);
    const bool expected = std::abs(d(0)) <= 1e-10 && d(1) >= -1e-10;
    CHECK(in_k == expected);
  }
  CHECK_THROWS_AS(critical_cone(p, x, Vector::Ones(2)), std::invalid_argument);
}

TEST_CASE("enumerate_faces of the nonnegative quadrant") {
  auto faces = enumerate_faces(PolyhedralCone::nonneg_orthant(2));
  CHECK(faces.size() == 4);
  std::set<Index> dims;
  for (const auto& f : faces) dims.insert(f.span_basis.cols());
  CHECK(dims == std::set<Index>({0, 1, 2}));
}

TEST_CASE("enumerate_faces of a halfline in a hyperplane") {
  // K = {x1 = 0, x2 >= 0}
  PolyhedralCone k;
  k.ambient_dim = 2;
  k.eq_A.resize(1, 2);
  k.eq_A << 1, 0;
  k.ineq_A.resize(1, 2);
  k.ineq_A << 0, -1;
  CHECK(enumerate_faces(k).size() == 2);
}

TEST_CASE("enumerate_faces deduplicates redundant constraints") {
  PolyhedralCone k;
  k.ambient_dim = 2;
  k.eq_A.resize(0, 2);
  k.ineq_A.resize(3, 2);
  k.ineq_A << -1, 0, 0, -1, -1, -1;  // x1 >= 0, x2 >= 0, x1+x2 >= 0 (redundant)
  CHECK(enumerate_faces(k).size() == 4);
}

TEST_CASE("face lattice covers sampled cone points") {
  PolyhedralCone k;
  k.ambient_dim = 3;
  k.eq_A.resize(0, 3);
  k.ineq_A.resize(3, 3);
  k.ineq_A << -1, 0, 0, 0, -1, 0, 1, 1, -1;  // x1,x2 >= 0, x3 >= x1+x2
  auto faces = enumerate_faces(k);

  Rng rng(17);
  int covered = 0;
  for (int i = 0; i < 1000; ++i) {
    Vector x(3);
    x << std::abs(random_unit_sphere(rng, 1)(0)), std::abs(random_unit_sphere(rng, 1)(0)), 0;
    x(2) = x(0) + x(1) + static_cast<double>(rng() % 3);  // sometimes on the slanted facet
    REQUIRE(k.as_polyhedron().contains(x, 1e-9));
    // active pattern of the sample
    std::vector<Index> pattern;
    for (Index r = 0; r < k.ineq_A.rows(); ++r)
      if (std::abs(k.ineq_A.row(r).dot(x)) <= 1e-9) pattern.push_back(r);
    int matches = 0;
    for (const auto& f : faces)
      if (f.active_inequalities == pattern) ++matches;
    CHECK(matches == 1);
    covered += matches;

    // span nesting is consistent with active-set inclusion
    for (const auto& f : faces)
      for (const auto& g : faces) {
        if (f.active_inequalities.size() <= g.active_inequalities.size()) continue;
        const bool subset = std::includes(f.active_inequalities.begin(), f.active_inequalities.end(),
                                          g.active_inequalities.begin(), g.active_inequalities.end());
        if (!subset) continue;
        // span(f) must lie inside span(g)
        if (f.span_basis.cols() == 0) continue;
        Matrix proj = g.span_basis * g.span_basis.transpose();
        CHECK((proj * f.span_basis - f.span_basis).cwiseAbs().maxCoeff() <= 1e-9);
      }
  }
  CHECK(covered == 1000);
}

TEST_CASE("lp_solve basics") {
  // min x1 over 0 <= x1 <= 1
  Polyhedron p = Polyhedron::whole_space(1);
  p.ineq_A.resize(2, 1);
  p.ineq_A << 1, -1;
  p.ineq_b.resize(2);
  p.ineq_b << 1, 0;
  auto r = lp_solve(Vector::Ones(1), p, LpSense::Min);
  REQUIRE(r.status == LpStatus::Optimal);
  CHECK(r.value == doctest::Approx(0.0));

  // max x1 over x1 >= 0
  auto u = lp_solve(Vector::Ones(1), Polyhedron::nonneg_orthant(1), LpSense::Max);
  CHECK(u.status == LpStatus::Unbounded);

  // min x1+x2 over {x1+x2 >= 1, x >= 0}
  Polyhedron q = Polyhedron::nonneg_orthant(2);
  Matrix extra(1, 2);
  extra << -1, -1;
  Matrix all(3, 2);
  all << q.ineq_A, extra;
  q.ineq_A = all;
  Vector rhs(3);
  rhs << 0, 0, -1;
  q.ineq_b = rhs;
  auto v = lp_solve(Vector::Ones(2), q, LpSense::Min);
  REQUIRE(v.status == LpStatus::Optimal);
  CHECK(v.value == doctest::Approx(1.0));
}

TEST_CASE("lp_solve detects infeasibility") {
  Polyhedron p = Polyhedron::whole_space(1);
  p.ineq_A.resize(2, 1);
  p.ineq_A << 1, -1;
  p.ineq_b.resize(2);
  p.ineq_b << -1, -1;
  CHECK(lp_solve(Vector::Ones(1), p, LpSense::Min).status == LpStatus::Infeasible);
}

TEST_CASE("lp_solve agrees with grid oracle on 2-D instances") {
  Rng rng(31);
  for (int trial = 0; trial < 25; ++trial) {
    // random bounded-feasible instance inside [-1,1]^2
    Polyhedron p = Polyhedron::whole_space(2);
    const Index m = 1 + static_cast<Index>(rng() % 3);
    Matrix rows(m + 4, 2);
    Vector rhs(m + 4);
    rows.topRows(m) = random_matrix(rng, m, 2);
    for (Index i = 0; i < m; ++i) rhs(i) = 0.3;  // keeps 0 feasible
    rows.bottomRows(4) << 1, 0, -1, 0, 0, 1, 0, -1;
    rhs.tail(4) = Vector::Ones(4);
    p.ineq_A = rows;
    p.ineq_b = rhs;
    Vector c = random_matrix(rng, 2, 1).col(0);
    auto r = lp_solve(c, p, LpSense::Min);
    REQUIRE(r.status == LpStatus::Optimal);

    double best = kInf;
    for (double a = -1.0; a <= 1.0 + 1e-12; a += 1e-3)
      for (double b = -1.0; b <= 1.0 + 1e-12; b += 1e-3) {
        Vector pt(2);
        pt << a, b;
        if (!p.contains(pt, 1e-9)) continue;
        best = std::min(best, c.dot(pt));
      }
    CHECK(std::abs(r.value - best) <= 1e-2 * (1.0 + std::abs(best)));
    CHECK(r.value <= best + 1e-9);  // enumeration is exact, grid only approximate
  }
}

TEST_CASE("lp_solve caps") {
  CHECK_THROWS_AS(lp_solve(Vector::Ones(13), Polyhedron::whole_space(13), LpSense::Min), CapExceeded);
}

TEST_CASE("distance to box normal cone") {
  Box b{Vector::Zero(1), Vector::Ones(1)};
  // interior: cone {0}
  CHECK(distance_to_box_normal_cone(b, Vector::Constant(1, 0.5), Vector::Constant(1, 0.7)) == doctest::Approx(0.7));
  // at lower bound: cone R-
  CHECK(distance_to_box_normal_cone(b, Vector::Zero(1), Vector::Constant(1, -2.0)) == doctest::Approx(0.0));
  CHECK(distance_to_box_normal_cone(b, Vector::Zero(1), Vector::Constant(1, 3.0)) == doctest::Approx(3.0));
  // outside the box
  CHECK(distance_to_box_normal_cone(b, Vector::Constant(1, 2.0), Vector::Zero(1)) == kInf);
}

}  // TEST_SUITE
