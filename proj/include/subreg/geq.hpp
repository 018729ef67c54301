#pragma once

#include "subreg/polyhedral.hpp"

#include <functional>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

namespace subreg {

/// Single-valued map with value oracle and optional analytic Jacobian.
/// Missing Jacobians fall back to central differences, step 1e-6*(1+|x|).
struct SmoothMap {
  Index dim_in = 0;
  Index dim_out = 0;
  std::function<Vector(const Vector&)> eval;
  std::function<Matrix(const Vector&)> jac;

  Vector operator()(const Vector& x) const;
  Matrix jacobian(const Vector& x) const;
};

Matrix fd_jacobian(const std::function<Vector(const Vector&)>& f, const Vector& x, Index dim_out);

SmoothMap identity_map(Index n);
SmoothMap linear_map(const Matrix& a);
SmoothMap affine_map(const Matrix& a, const Vector& b);  // x -> a x + b
SmoothMap zero_map(Index n, Index m);

struct ZeroMap {};
struct BoxNormalCone {
  Box box;
};
struct PolyhedralNormalCone {
  Polyhedron set;
};
/// N over R^n x R^s x R_+^{m-s}; the ambient dimension fixes n.
struct KktCone {
  Index s = 0;
  Index m = 0;
};
/// Finite graph {(x_i, y_i)}; F(x) = {y_i : x_i = x}.
struct ExplicitGraph {
  std::vector<std::pair<Vector, Vector>> points;
};
/// F(x) = { f_i(x) } over a finite family of smooth selections.
struct FiniteSelection {
  std::vector<SmoothMap> maps;
};
/// F(x) == set, constant polyhedral right-hand side (inequality systems).
struct ConstantPolyhedron {
  Polyhedron set;
};

using SetPart = std::variant<ZeroMap, BoxNormalCone, PolyhedralNormalCone, KktCone, ExplicitGraph,
                             FiniteSelection, ConstantPolyhedron>;

/// The box whose normal cone a BoxNormalCone/KktCone set part represents.
Box set_part_box(const SetPart& f, Index dim);
bool set_part_is_box_like(const SetPart& f);

/// 0 in f(x) + F(x), with a reference pair (xbar, ybar).
struct GeneralizedEquation {
  SmoothMap smooth;
  SetPart set_part;
  std::optional<Vector> reference_point;
  Vector reference_value;  // ybar, zero when defaulted
};

/// Builds a GE and verifies ybar in f(xbar)+F(xbar) within 1e-8 when a
/// reference point is given.
GeneralizedEquation make_generalized_equation(SmoothMap f, SetPart set_part,
                                              std::optional<Vector> xbar,
                                              std::optional<Vector> ybar = std::nullopt);

/// d(ybar, f(x) + F(x)); +inf when the set part is empty at x.
double residual_distance(const GeneralizedEquation& ge, const Vector& x);

/// d(ybar + shift, f(x) + F(x)) for perturbed iterations.
double residual_distance_shifted(const GeneralizedEquation& ge, const Vector& x, const Vector& shift);

/// Phi(x) = x - P_C(x - (f(x) - ybar)); zeros coincide with GE solutions.
/// Requires a box-like set part.
Vector natural_map(const GeneralizedEquation& ge, const Vector& x);

/// A selection from the Bouligand Jacobian of the natural map: row i is the
/// Jacobian row on the smooth branch, e_i^T when the projection is clamped;
/// ties within 1e-12 pick the smooth branch.
Matrix b_jacobian_natural_map(const GeneralizedEquation& ge, const Vector& x);

/// Exact solution of 0 in q + M z + N_C(z) by complementarity-pattern
/// enumeration; among all solutions returns the one nearest to nearest_to.
std::optional<Vector> avi_solve(const Matrix& m, const Vector& q, const SetPart& c,
                                const Vector& nearest_to);

}  // namespace subreg
