#pragma once

#include "subreg/numerics.hpp"

#include <optional>
#include <vector>

namespace subreg {

// Hard caps for the exhaustive-enumeration routines.
namespace cap {
inline constexpr Index project_dim = 12;
inline constexpr Index project_ineq = 20;
inline constexpr Index lp_dim = 12;
inline constexpr Index lp_rows = 24;
inline constexpr Index face_ineq = 20;
}  // namespace cap

/// Axis-aligned box; +-inf entries mark absent bounds.
struct Box {
  Vector lower;
  Vector upper;

  Index dim() const { return lower.size(); }
  bool contains(const Vector& x, double eps = tol::active) const;
  static Box whole_space(Index n);
  static Box nonneg_orthant(Index n);
};

/// {x : ineq_A x <= ineq_b, eq_A x = eq_b} in R^ambient_dim.
struct Polyhedron {
  Matrix ineq_A;
  Vector ineq_b;
  Matrix eq_A;
  Vector eq_b;
  Index ambient_dim = 0;

  bool contains(const Vector& x, double eps = tol::active) const;
  static Polyhedron whole_space(Index n);
  static Polyhedron from_box(const Box& b);  // finite bounds become rows
  static Polyhedron nonneg_orthant(Index n);
};

/// Polyhedron with zero right-hand sides: ineq_A x <= 0, eq_A x = 0.
struct PolyhedralCone {
  Matrix ineq_A;
  Matrix eq_A;
  Index ambient_dim = 0;

  Polyhedron as_polyhedron() const;
  static PolyhedralCone whole_space(Index n);
  static PolyhedralCone nonneg_orthant(Index n);
  /// {x : E x = 0}; pass an orthonormal basis M of the subspace.
  static PolyhedralCone subspace(const Matrix& basis);
};

struct Face {
  std::vector<Index> active_inequalities;  // canonical: rows vanishing on the span
  Matrix span_basis;                       // orthonormal columns
};

/// { conic * lambda + lin * mu : lambda >= 0, mu free }, generators as columns.
struct GeneratorCone {
  Matrix conic;
  Matrix lin;
  Index ambient_dim = 0;
};

enum class LpStatus { Optimal, Unbounded, Infeasible };
enum class LpSense { Min, Max };

struct LpResult {
  LpStatus status = LpStatus::Infeasible;
  Vector x;
  double value = 0.0;
};

Vector project_box(const Vector& x, const Box& b);

/// Euclidean projection by exhaustive active-set enumeration.  Throws
/// std::runtime_error when no candidate is feasible (empty polyhedron).
Vector project_polyhedron(const Vector& x, const Polyhedron& p);

/// Normal cone at x in generator form; nullopt when x is infeasible beyond 1e-10.
std::optional<GeneratorCone> normal_cone_at(const Polyhedron& p, const Vector& x);

/// Tangent cone at x intersected with v^perp, in constraint form.
/// Requires x in P and v in N_P(x) (membership tested at 1e-8).
PolyhedralCone critical_cone(const Polyhedron& p, const Vector& x, const Vector& v);

/// All faces with nonempty relative interior, deduplicated by canonical
/// active pattern.
std::vector<Face> enumerate_faces(const PolyhedralCone& k);

/// Exact LP by basic-solution enumeration plus recession-ray check.
LpResult lp_solve(const Vector& c, const Polyhedron& p, LpSense sense);

/// Same algorithm without the public size caps, for internal helper LPs
/// (face interior tests, pattern witnesses) whose dimensions are derived.
LpResult lp_solve_unchecked(const Vector& c, const Polyhedron& p, LpSense sense);

/// Exact Euclidean distance from r to a finitely generated cone.
double distance_to_generated_cone(const Vector& r, const GeneratorCone& cone);

/// d(r, N_P(x)); +inf when x is infeasible.
double distance_to_normal_cone(const Polyhedron& p, const Vector& x, const Vector& r);

/// Componentwise distance from r to N_B(x); +inf when x is outside the box.
double distance_to_box_normal_cone(const Box& b, const Vector& x, const Vector& r);

}  // namespace subreg
