#include "subreg/polyhedral.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>

namespace subreg {
namespace {

LpResult lp_solve_impl(const Vector& c, const Polyhedron& p, LpSense sense);

// Rows of a matrix selected by a bitmask over row indices.
Matrix select_rows(const Matrix& A, std::uint32_t mask) {
  std::vector<Index> rows;
  for (Index i = 0; i < A.rows(); ++i)
    if (mask & (1u << i)) rows.push_back(i);
  Matrix out(static_cast<Index>(rows.size()), A.cols());
  for (Index k = 0; k < out.rows(); ++k) out.row(k) = A.row(rows[static_cast<std::size_t>(k)]);
  return out;
}

Vector select_entries(const Vector& b, std::uint32_t mask) {
  std::vector<double> vals;
  for (Index i = 0; i < b.size(); ++i)
    if (mask & (1u << i)) vals.push_back(b(i));
  if (vals.empty()) return Vector(0);
  return Eigen::Map<const Vector>(vals.data(), static_cast<Index>(vals.size()));
}

Matrix vstack(const Matrix& top, const Matrix& bottom) {
  Matrix out(top.rows() + bottom.rows(), std::max(top.cols(), bottom.cols()));
  if (top.rows() > 0) out.topRows(top.rows()) = top;
  if (bottom.rows() > 0) out.bottomRows(bottom.rows()) = bottom;
  return out;
}

Vector vcat(const Vector& a, const Vector& b) {
  Vector out(a.size() + b.size());
  out.head(a.size()) = a;
  out.tail(b.size()) = b;
  return out;
}

// Enumerates k-subsets of {0..n-1} in lexicographic order.
void for_each_subset_of_size(Index n, Index k, const std::function<void(const std::vector<Index>&)>& fn) {
  if (k < 0 || k > n) return;
  std::vector<Index> idx(static_cast<std::size_t>(k));
  for (Index i = 0; i < k; ++i) idx[static_cast<std::size_t>(i)] = i;
  while (true) {
    fn(idx);
    Index i = k - 1;
    while (i >= 0 && idx[static_cast<std::size_t>(i)] == n - k + i) --i;
    if (i < 0) break;
    ++idx[static_cast<std::size_t>(i)];
    for (Index j = i + 1; j < k; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
  }
}

}  // namespace

bool Box::contains(const Vector& x, double eps) const {
  if (x.size() != dim()) throw std::invalid_argument("Box::contains: dimension mismatch");
  for (Index i = 0; i < dim(); ++i)
    if (x(i) < lower(i) - eps || x(i) > upper(i) + eps) return false;
  return true;
}

Box Box::whole_space(Index n) {
  return Box{Vector::Constant(n, -kInf), Vector::Constant(n, kInf)};
}

Box Box::nonneg_orthant(Index n) {
  return Box{Vector::Zero(n), Vector::Constant(n, kInf)};
}

bool Polyhedron::contains(const Vector& x, double eps) const {
  if (x.size() != ambient_dim) throw std::invalid_argument("Polyhedron::contains: dimension mismatch");
  if (ineq_A.rows() > 0 && ((ineq_A * x - ineq_b).array() > eps).any()) return false;
  if (eq_A.rows() > 0 && ((eq_A * x - eq_b).cwiseAbs().array() > eps).any()) return false;
  return true;
}

Polyhedron Polyhedron::whole_space(Index n) {
  return Polyhedron{Matrix(0, n), Vector(0), Matrix(0, n), Vector(0), n};
}

Polyhedron Polyhedron::from_box(const Box& b) {
  const Index n = b.dim();
  std::vector<std::pair<Vector, double>> rows;
  for (Index i = 0; i < n; ++i) {
    if (std::isfinite(b.upper(i))) {
      Vector r = Vector::Zero(n);
      r(i) = 1.0;
      rows.emplace_back(r, b.upper(i));
    }
    if (std::isfinite(b.lower(i))) {
      Vector r = Vector::Zero(n);
      r(i) = -1.0;
      rows.emplace_back(r, -b.lower(i));
    }
  }
  Polyhedron p = whole_space(n);
  p.ineq_A.resize(static_cast<Index>(rows.size()), n);
  p.ineq_b.resize(static_cast<Index>(rows.size()));
  for (Index k = 0; k < p.ineq_A.rows(); ++k) {
    p.ineq_A.row(k) = rows[static_cast<std::size_t>(k)].first.transpose();
    p.ineq_b(k) = rows[static_cast<std::size_t>(k)].second;
  }
  return p;
}

Polyhedron Polyhedron::nonneg_orthant(Index n) {
  Polyhedron p = whole_space(n);
  p.ineq_A = -Matrix::Identity(n, n);
  p.ineq_b = Vector::Zero(n);
  return p;
}

Polyhedron PolyhedralCone::as_polyhedron() const {
  return Polyhedron{ineq_A, Vector::Zero(ineq_A.rows()), eq_A, Vector::Zero(eq_A.rows()), ambient_dim};
}

PolyhedralCone PolyhedralCone::whole_space(Index n) {
  return PolyhedralCone{Matrix(0, n), Matrix(0, n), n};
}

PolyhedralCone PolyhedralCone::nonneg_orthant(Index n) {
  return PolyhedralCone{-Matrix::Identity(n, n), Matrix(0, n), n};
}

PolyhedralCone PolyhedralCone::subspace(const Matrix& basis) {
  const Index n = basis.rows();
  // complement rows annihilate the subspace
  Matrix compl_basis = nullspace_basis(basis.transpose());
  return PolyhedralCone{Matrix(0, n), compl_basis.transpose(), n};
}

Vector project_box(const Vector& x, const Box& b) {
  if (x.size() != b.dim()) throw std::invalid_argument("project_box: dimension mismatch");
  return x.cwiseMax(b.lower).cwiseMin(b.upper);
}

Vector project_polyhedron(const Vector& x, const Polyhedron& p) {
  if (x.size() != p.ambient_dim) throw std::invalid_argument("project_polyhedron: dimension mismatch");
  if (p.ambient_dim > cap::project_dim) throw CapExceeded("project_polyhedron: ambient_dim cap (12)");
  if (p.ineq_A.rows() > cap::project_ineq) throw CapExceeded("project_polyhedron: inequality cap (20)");
  if (p.contains(x)) return x;

  const Index m = p.ineq_A.rows();
  const Index n = p.ambient_dim;
  // subsets ordered by size: the first sign-valid feasible KKT point is the projection
  std::vector<std::uint32_t> masks;
  for (std::uint32_t mask = 0; mask < (1u << m); ++mask) masks.push_back(mask);
  std::sort(masks.begin(), masks.end(), [](std::uint32_t a, std::uint32_t b) {
    const int ca = __builtin_popcount(a), cb = __builtin_popcount(b);
    return ca != cb ? ca < cb : a < b;
  });

  bool any_feasible = false;
  for (std::uint32_t mask : masks) {
    const Matrix Aact = vstack(p.eq_A, select_rows(p.ineq_A, mask));
    const Vector bact = vcat(p.eq_b, select_entries(p.ineq_b, mask));
    const Index k = Aact.rows();
    // KKT of min ||z-x||^2 s.t. Aact z = bact:  z + Aact^T nu = x
    Matrix kkt(n + k, n + k);
    kkt.setZero();
    kkt.topLeftCorner(n, n) = Matrix::Identity(n, n);
    if (k > 0) {
      kkt.topRightCorner(n, k) = Aact.transpose();
      kkt.bottomLeftCorner(k, n) = Aact;
    }
    Vector rhs = vcat(x, bact);
    Vector sol;
    auto direct = solve_linear(kkt, rhs);
    if (direct) {
      sol = *direct;
    } else {
      // degenerate active set: fall back to least squares and verify
      sol = kkt.colPivHouseholderQr().solve(rhs);
      if ((kkt * sol - rhs).cwiseAbs().maxCoeff() > 1e-8) continue;
    }
    const Vector z = sol.head(n);
    const Vector nu = sol.tail(k);
    if (!p.contains(z, 1e-9)) continue;
    // inequality multipliers must be nonnegative
    bool signs_ok = true;
    for (Index j = p.eq_A.rows(); j < k; ++j)
      if (nu(j) < -1e-9) signs_ok = false;
    if (!signs_ok) {
      any_feasible = true;
      continue;
    }
    return z;
  }
  if (!any_feasible) throw std::runtime_error("project_polyhedron: polyhedron appears infeasible");
  throw std::runtime_error("project_polyhedron: no sign-valid candidate found");
}

std::optional<GeneratorCone> normal_cone_at(const Polyhedron& p, const Vector& x) {
  if (!p.contains(x)) return std::nullopt;
  std::vector<Index> active;
  for (Index i = 0; i < p.ineq_A.rows(); ++i)
    if (std::abs(p.ineq_A.row(i).dot(x) - p.ineq_b(i)) <= tol::active) active.push_back(i);
  GeneratorCone cone;
  cone.ambient_dim = p.ambient_dim;
  cone.conic.resize(p.ambient_dim, static_cast<Index>(active.size()));
  for (Index k = 0; k < cone.conic.cols(); ++k)
    cone.conic.col(k) = p.ineq_A.row(active[static_cast<std::size_t>(k)]).transpose();
  cone.lin = p.eq_A.transpose();
  return cone;
}

PolyhedralCone critical_cone(const Polyhedron& p, const Vector& x, const Vector& v) {
  if (!p.contains(x, 1e-8)) throw std::invalid_argument("critical_cone: x not in P");
  if (distance_to_normal_cone(p, x, v) > 1e-8) throw std::invalid_argument("critical_cone: v not normal at x");

  std::vector<Index> active;
  for (Index i = 0; i < p.ineq_A.rows(); ++i)
    if (std::abs(p.ineq_A.row(i).dot(x) - p.ineq_b(i)) <= tol::active) active.push_back(i);

  PolyhedralCone k;
  k.ambient_dim = p.ambient_dim;
  k.ineq_A.resize(static_cast<Index>(active.size()), p.ambient_dim);
  for (Index r = 0; r < k.ineq_A.rows(); ++r) k.ineq_A.row(r) = p.ineq_A.row(active[static_cast<std::size_t>(r)]);
  const bool v_nonzero = v.size() > 0 && v.cwiseAbs().maxCoeff() > tol::active;
  k.eq_A.resize(p.eq_A.rows() + (v_nonzero ? 1 : 0), p.ambient_dim);
  if (p.eq_A.rows() > 0) k.eq_A.topRows(p.eq_A.rows()) = p.eq_A;
  if (v_nonzero) k.eq_A.row(p.eq_A.rows()) = v.transpose();
  return k;
}

std::vector<Face> enumerate_faces(const PolyhedralCone& k) {
  const Index m = k.ineq_A.rows();
  if (m > cap::face_ineq) throw CapExceeded("enumerate_faces: inequality cap (20)");
  const Index n = k.ambient_dim;

  std::vector<Face> faces;
  auto same_pattern = [&](const std::vector<Index>& a, const std::vector<Index>& b) { return a == b; };

  for (std::uint32_t mask = 0; mask < (1u << m); ++mask) {
    // relative interior test: max t s.t. rows in J vanish, others <= -t
    const Index extra = n + 1;  // (x, t)
    std::vector<Vector> ineq_rows;
    std::vector<double> ineq_rhs;
    for (Index i = 0; i < m; ++i) {
      if (mask & (1u << i)) continue;
      Vector row(extra);
      row.head(n) = k.ineq_A.row(i).transpose();
      row(n) = 1.0;
      ineq_rows.push_back(row);
      ineq_rhs.push_back(0.0);
    }
    {
      Vector row = Vector::Zero(extra);
      row(n) = 1.0;
      ineq_rows.push_back(row);
      ineq_rhs.push_back(1.0);
    }
    for (Index i = 0; i < n; ++i) {  // box the slice so the LP stays bounded
      Vector row = Vector::Zero(extra);
      row(i) = 1.0;
      ineq_rows.push_back(row);
      ineq_rhs.push_back(1.0);
      row(i) = -1.0;
      ineq_rows.push_back(row);
      ineq_rhs.push_back(1.0);
    }
    Matrix eq(k.eq_A.rows() + __builtin_popcount(mask), extra);
    eq.setZero();
    if (k.eq_A.rows() > 0) eq.topLeftCorner(k.eq_A.rows(), n) = k.eq_A;
    {
      Index r = k.eq_A.rows();
      for (Index i = 0; i < m; ++i)
        if (mask & (1u << i)) eq.block(r++, 0, 1, n) = k.ineq_A.row(i);
    }
    Polyhedron slice;
    slice.ambient_dim = extra;
    slice.ineq_A.resize(static_cast<Index>(ineq_rows.size()), extra);
    slice.ineq_b.resize(static_cast<Index>(ineq_rhs.size()));
    for (Index r = 0; r < slice.ineq_A.rows(); ++r) {
      slice.ineq_A.row(r) = ineq_rows[static_cast<std::size_t>(r)].transpose();
      slice.ineq_b(r) = ineq_rhs[static_cast<std::size_t>(r)];
    }
    slice.eq_A = eq;
    slice.eq_b = Vector::Zero(eq.rows());

    Vector c = Vector::Zero(extra);
    c(n) = 1.0;
    LpResult lp = lp_solve_impl(c, slice, LpSense::Max);
    if (lp.status != LpStatus::Optimal || lp.value <= 1e-9) continue;

    // canonical pattern: inequalities vanishing identically on the span
    Matrix active_stack(k.eq_A.rows() + __builtin_popcount(mask), n);
    if (k.eq_A.rows() > 0) active_stack.topRows(k.eq_A.rows()) = k.eq_A;
    {
      Index r = k.eq_A.rows();
      for (Index i = 0; i < m; ++i)
        if (mask & (1u << i)) active_stack.row(r++) = k.ineq_A.row(i);
    }
    Matrix span = nullspace_basis(active_stack);
    std::vector<Index> canonical;
    for (Index i = 0; i < m; ++i) {
      const double on_span = span.cols() == 0 ? 0.0 : (k.ineq_A.row(i) * span).cwiseAbs().maxCoeff();
      if (on_span <= 1e-9) canonical.push_back(i);
    }
    bool duplicate = false;
    for (const Face& f : faces)
      if (same_pattern(f.active_inequalities, canonical)) duplicate = true;
    if (duplicate) continue;

    // recompute the span from the canonical pattern
    Matrix canon_stack(k.eq_A.rows() + static_cast<Index>(canonical.size()), n);
    if (k.eq_A.rows() > 0) canon_stack.topRows(k.eq_A.rows()) = k.eq_A;
    for (std::size_t j = 0; j < canonical.size(); ++j)
      canon_stack.row(k.eq_A.rows() + static_cast<Index>(j)) = k.ineq_A.row(canonical[j]);
    faces.push_back(Face{canonical, nullspace_basis(canon_stack)});
  }
  return faces;
}

LpResult lp_solve(const Vector& c, const Polyhedron& p, LpSense sense) {
  if (c.size() != p.ambient_dim) throw std::invalid_argument("lp_solve: dimension mismatch");
  if (p.ambient_dim > cap::lp_dim) throw CapExceeded("lp_solve: ambient_dim cap (12)");
  if (p.ineq_A.rows() + p.eq_A.rows() > cap::lp_rows) throw CapExceeded("lp_solve: constraint cap (24)");
  return lp_solve_impl(c, p, sense);
}

LpResult lp_solve_unchecked(const Vector& c, const Polyhedron& p, LpSense sense) {
  if (c.size() != p.ambient_dim) throw std::invalid_argument("lp_solve: dimension mismatch");
  return lp_solve_impl(c, p, sense);
}

namespace {

LpResult lp_solve_impl(const Vector& c, const Polyhedron& p, LpSense sense) {
  const Vector cmin = sense == LpSense::Max ? Vector(-c) : c;
  const Matrix stacked = vstack(p.ineq_A, p.eq_A);

  // lineality directions first
  const Matrix lin = nullspace_basis(stacked);
  const Matrix v = rowspace_basis(stacked);
  const Index nred = v.cols();

  LpResult out;
  if (nred == 0) {
    // constraints see nothing: feasibility is 0 <= b, 0 = eq_b
    const bool feas = (p.ineq_b.size() == 0 || p.ineq_b.minCoeff() >= -tol::active) &&
                      (p.eq_b.size() == 0 || p.eq_b.cwiseAbs().maxCoeff() <= tol::active);
    if (!feas) {
      out.status = LpStatus::Infeasible;
      return out;
    }
    if (lin.cols() > 0 && (lin.transpose() * cmin).cwiseAbs().maxCoeff() > 1e-12) {
      out.status = LpStatus::Unbounded;
      return out;
    }
    out.status = LpStatus::Optimal;
    out.x = Vector::Zero(p.ambient_dim);
    out.value = 0.0;
    return out;
  }

  const Matrix Ai = p.ineq_A.rows() > 0 ? Matrix(p.ineq_A * v) : Matrix(0, nred);
  const Matrix Ae = p.eq_A.rows() > 0 ? Matrix(p.eq_A * v) : Matrix(0, nred);
  const Vector cred = v.transpose() * cmin;
  const Index rank_e = numerical_rank(Ae);
  const Index need = nred - rank_e;

  const double scale = 1.0 + (stacked.rows() > 0 ? stacked.cwiseAbs().maxCoeff() : 0.0) +
                       (p.ineq_b.size() > 0 ? p.ineq_b.cwiseAbs().maxCoeff() : 0.0) +
                       (p.eq_b.size() > 0 ? p.eq_b.cwiseAbs().maxCoeff() : 0.0);
  const double feas_eps = 1e-9 * scale;

  auto feasible_red = [&](const Vector& z) {
    if (Ai.rows() > 0 && ((Ai * z - p.ineq_b).array() > feas_eps).any()) return false;
    if (Ae.rows() > 0 && ((Ae * z - p.eq_b).cwiseAbs().array() > feas_eps).any()) return false;
    return true;
  };

  bool have_vertex = false;
  double best = kInf;
  Vector best_z;
  for_each_subset_of_size(Ai.rows(), need, [&](const std::vector<Index>& t) {
    Matrix sys(Ae.rows() + need, nred);
    Vector rhs(Ae.rows() + need);
    if (Ae.rows() > 0) {
      sys.topRows(Ae.rows()) = Ae;
      rhs.head(Ae.rows()) = p.eq_b;
    }
    for (Index j = 0; j < need; ++j) {
      sys.row(Ae.rows() + j) = Ai.row(t[static_cast<std::size_t>(j)]);
      rhs(Ae.rows() + j) = p.ineq_b(t[static_cast<std::size_t>(j)]);
    }
    if (numerical_rank(sys) < nred) return;
    const Vector z = sys.colPivHouseholderQr().solve(rhs);
    if ((sys * z - rhs).cwiseAbs().maxCoeff() > feas_eps) return;
    if (!feasible_red(z)) return;
    have_vertex = true;
    const double val = cred.dot(z);
    if (val < best) {
      best = val;
      best_z = z;
    }
  });

  if (!have_vertex) {
    out.status = LpStatus::Infeasible;
    return out;
  }

  // objective escapes along the lineality space
  if (lin.cols() > 0 && (lin.transpose() * cmin).cwiseAbs().maxCoeff() > 1e-12) {
    out.status = LpStatus::Unbounded;
    return out;
  }

  // extreme-ray check in the reduced (pointed) space
  bool unbounded = false;
  if (need >= 1) {
    for_each_subset_of_size(Ai.rows(), need - 1, [&](const std::vector<Index>& t) {
      if (unbounded) return;
      Matrix sys(Ae.rows() + static_cast<Index>(t.size()), nred);
      if (Ae.rows() > 0) sys.topRows(Ae.rows()) = Ae;
      for (std::size_t j = 0; j < t.size(); ++j) sys.row(Ae.rows() + static_cast<Index>(j)) = Ai.row(t[j]);
      const Matrix dirs = nullspace_basis(sys);
      if (dirs.cols() != 1) return;
      for (int sgn : {1, -1}) {
        const Vector d = sgn * dirs.col(0);
        if (Ai.rows() > 0 && ((Ai * d).array() > 1e-10).any()) continue;
        if (Ae.rows() > 0 && (Ae * d).cwiseAbs().maxCoeff() > 1e-10) continue;
        if (cred.dot(d) < -1e-10) unbounded = true;
      }
    });
  }
  if (unbounded) {
    out.status = LpStatus::Unbounded;
    return out;
  }

  out.status = LpStatus::Optimal;
  out.x = v * best_z;
  out.value = c.dot(out.x);
  return out;
}

}  // namespace

double distance_to_generated_cone(const Vector& r, const GeneratorCone& cone) {
  const Index g = cone.conic.cols();
  if (g > 24) throw CapExceeded("distance_to_generated_cone: generator cap (24)");
  double best = kInf;
  for (std::uint32_t mask = 0; mask < (1u << g); ++mask) {
    const Index k = __builtin_popcount(mask);
    Matrix m(cone.ambient_dim, k + cone.lin.cols());
    Index col = 0;
    for (Index j = 0; j < g; ++j)
      if (mask & (1u << j)) m.col(col++) = cone.conic.col(j);
    if (cone.lin.cols() > 0) m.rightCols(cone.lin.cols()) = cone.lin;
    double dist;
    if (m.cols() == 0) {
      dist = r.norm();
    } else {
      const Vector coef = m.colPivHouseholderQr().solve(r);
      bool ok = true;
      for (Index j = 0; j < k; ++j)
        if (coef(j) < -1e-10) ok = false;
      if (!ok) continue;
      dist = (m * coef - r).norm();
    }
    best = std::min(best, dist);
  }
  return best;
}

double distance_to_normal_cone(const Polyhedron& p, const Vector& x, const Vector& r) {
  auto cone = normal_cone_at(p, x);
  if (!cone) return kInf;
  return distance_to_generated_cone(r, *cone);
}

double distance_to_box_normal_cone(const Box& b, const Vector& x, const Vector& r) {
  if (x.size() != b.dim() || r.size() != b.dim())
    throw std::invalid_argument("distance_to_box_normal_cone: dimension mismatch");
  if (!b.contains(x)) return kInf;
  double sq = 0.0;
  for (Index i = 0; i < b.dim(); ++i) {
    const bool at_lower = std::isfinite(b.lower(i)) && std::abs(x(i) - b.lower(i)) <= tol::active;
    const bool at_upper = std::isfinite(b.upper(i)) && std::abs(x(i) - b.upper(i)) <= tol::active;
    double di;
    if (at_lower && at_upper) {
      di = 0.0;  // fixed coordinate: normal cone is the whole line
    } else if (at_lower) {
      di = std::max(r(i), 0.0);  // cone is R_-
    } else if (at_upper) {
      di = std::min(r(i), 0.0);  // cone is R_+
    } else {
      di = r(i);  // interior: cone is {0}
    }
    sq += di * di;
  }
  return std::sqrt(sq);
}

}  // namespace subreg
