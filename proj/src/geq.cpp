#include "subreg/geq.hpp"

#include <cmath>

namespace subreg {

Vector SmoothMap::operator()(const Vector& x) const {
  if (x.size() != dim_in) throw std::invalid_argument("SmoothMap: dimension mismatch");
  Vector y = eval(x);
  if (y.size() != dim_out) throw std::invalid_argument("SmoothMap: oracle output dimension mismatch");
  return y;
}

Matrix SmoothMap::jacobian(const Vector& x) const {
  if (jac) {
    Matrix j = jac(x);
    if (j.rows() != dim_out || j.cols() != dim_in)
      throw std::invalid_argument("SmoothMap: jacobian oracle dimension mismatch");
    return j;
  }
  return fd_jacobian(eval, x, dim_out);
}

Matrix fd_jacobian(const std::function<Vector(const Vector&)>& f, const Vector& x, Index dim_out) {
  const double h = 1e-6 * (1.0 + x.norm());
  Matrix j(dim_out, x.size());
  Vector xp = x, xm = x;
  for (Index i = 0; i < x.size(); ++i) {
    xp(i) = x(i) + h;
    xm(i) = x(i) - h;
    j.col(i) = (f(xp) - f(xm)) / (2.0 * h);
    xp(i) = x(i);
    xm(i) = x(i);
  }
  return j;
}

SmoothMap identity_map(Index n) {
  return SmoothMap{n, n, [](const Vector& x) { return x; },
                   [n](const Vector&) { return Matrix::Identity(n, n); }};
}

SmoothMap linear_map(const Matrix& a) {
  return SmoothMap{a.cols(), a.rows(), [a](const Vector& x) { return Vector(a * x); },
                   [a](const Vector&) { return a; }};
}

SmoothMap affine_map(const Matrix& a, const Vector& b) {
  return SmoothMap{a.cols(), a.rows(), [a, b](const Vector& x) { return Vector(a * x + b); },
                   [a](const Vector&) { return a; }};
}

SmoothMap zero_map(Index n, Index m) {
  return SmoothMap{n, m, [m](const Vector&) { return Vector::Zero(m); },
                   [n, m](const Vector&) { return Matrix::Zero(m, n); }};
}

Box set_part_box(const SetPart& f, Index dim) {
  if (const auto* b = std::get_if<BoxNormalCone>(&f)) {
    if (b->box.dim() != dim) throw std::invalid_argument("set_part_box: box dimension mismatch");
    return b->box;
  }
  if (const auto* k = std::get_if<KktCone>(&f)) {
    const Index n = dim - k->m;
    if (n < 0 || k->s > k->m) throw std::invalid_argument("set_part_box: bad KktCone layout");
    Box box = Box::whole_space(dim);
    for (Index i = n + k->s; i < dim; ++i) box.lower(i) = 0.0;
    return box;
  }
  throw std::invalid_argument("set_part_box: set part is not box-like");
}

bool set_part_is_box_like(const SetPart& f) {
  return std::holds_alternative<BoxNormalCone>(f) || std::holds_alternative<KktCone>(f);
}

GeneralizedEquation make_generalized_equation(SmoothMap f, SetPart set_part,
                                              std::optional<Vector> xbar,
                                              std::optional<Vector> ybar) {
  GeneralizedEquation ge;
  ge.smooth = std::move(f);
  ge.set_part = std::move(set_part);
  ge.reference_point = std::move(xbar);
  ge.reference_value = ybar ? *ybar : Vector::Zero(ge.smooth.dim_out);
  if (ge.reference_value.size() != ge.smooth.dim_out)
    throw std::invalid_argument("make_generalized_equation: ybar dimension mismatch");
  if (ge.reference_point) {
    if (ge.reference_point->size() != ge.smooth.dim_in)
      throw std::invalid_argument("make_generalized_equation: xbar dimension mismatch");
    if (residual_distance(ge, *ge.reference_point) > 1e-8)
      throw std::invalid_argument("make_generalized_equation: ybar not in f(xbar)+F(xbar)");
  }
  return ge;
}

double residual_distance_shifted(const GeneralizedEquation& ge, const Vector& x, const Vector& shift) {
  const Vector target = ge.reference_value + shift;  // distance from this to f(x)+F(x)
  const Vector r = target - ge.smooth(x);            // distance from r to F(x)

  if (std::holds_alternative<ZeroMap>(ge.set_part)) return r.norm();

  if (const auto* b = std::get_if<BoxNormalCone>(&ge.set_part))
    return distance_to_box_normal_cone(b->box, x, r);

  if (std::holds_alternative<KktCone>(ge.set_part))
    return distance_to_box_normal_cone(set_part_box(ge.set_part, x.size()), x, r);

  if (const auto* p = std::get_if<PolyhedralNormalCone>(&ge.set_part))
    return distance_to_normal_cone(p->set, x, r);

  if (const auto* s = std::get_if<FiniteSelection>(&ge.set_part)) {
    double best = kInf;
    for (const auto& sel : s->maps) best = std::min(best, (r - sel(x)).norm());
    return best;
  }

  if (const auto* g = std::get_if<ExplicitGraph>(&ge.set_part)) {
    double best = kInf;
    for (const auto& [gx, gy] : g->points) {
      if ((gx - x).cwiseAbs().maxCoeff() > 1e-12) continue;
      best = std::min(best, (r - gy).norm());
    }
    return best;
  }

  if (const auto* cs = std::get_if<ConstantPolyhedron>(&ge.set_part))
    return (project_polyhedron(r, cs->set) - r).norm();

  throw std::logic_error("residual_distance: unhandled set part");
}

double residual_distance(const GeneralizedEquation& ge, const Vector& x) {
  return residual_distance_shifted(ge, x, Vector::Zero(ge.smooth.dim_out));
}

Vector natural_map(const GeneralizedEquation& ge, const Vector& x) {
  if (!set_part_is_box_like(ge.set_part))
    throw std::invalid_argument("natural_map: set part must be a box or KKT normal cone");
  const Box box = set_part_box(ge.set_part, x.size());
  return x - project_box(x - (ge.smooth(x) - ge.reference_value), box);
}

Matrix b_jacobian_natural_map(const GeneralizedEquation& ge, const Vector& x) {
  if (!set_part_is_box_like(ge.set_part))
    throw std::invalid_argument("b_jacobian_natural_map: set part must be a box or KKT normal cone");
  const Box box = set_part_box(ge.set_part, x.size());
  const Vector z = x - (ge.smooth(x) - ge.reference_value);
  const Matrix jf = ge.smooth.jacobian(x);
  Matrix out(x.size(), x.size());
  for (Index i = 0; i < x.size(); ++i) {
    const bool below = std::isfinite(box.lower(i)) && z(i) < box.lower(i) - 1e-12;
    const bool above = std::isfinite(box.upper(i)) && z(i) > box.upper(i) + 1e-12;
    if (below || above) {
      out.row(i) = Vector::Unit(x.size(), i).transpose();
    } else {
      out.row(i) = jf.row(i);  // smooth branch, also on ties
    }
  }
  return out;
}

namespace {

enum class CoordState { Free, AtLower, AtUpper };

// Least-squares solution of sys*z = rhs shifted as close to target as the
// solution affine set allows; nullopt when inconsistent.
std::optional<Vector> nearest_consistent_solution(const Matrix& sys, const Vector& rhs,
                                                  const Vector& target) {
  if (sys.cols() == 0) return Vector(0);
  const Vector z0 = sys.colPivHouseholderQr().solve(rhs);
  if (sys.rows() > 0 && (sys * z0 - rhs).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + rhs.cwiseAbs().maxCoeff()))
    return std::nullopt;
  const Matrix ns = nullspace_basis(sys);
  if (ns.cols() == 0) return z0;
  const Vector t = ns.transpose() * (target - z0);  // orthonormal columns
  return Vector(z0 + ns * t);
}

}  // namespace

std::optional<Vector> avi_solve(const Matrix& m, const Vector& q, const SetPart& c,
                                const Vector& nearest_to) {
  const Index n = m.rows();
  if (m.cols() != n || q.size() != n || nearest_to.size() != n)
    throw std::invalid_argument("avi_solve: dimension mismatch");

  Box box = Box::whole_space(n);
  if (std::holds_alternative<ZeroMap>(c)) {
    // plain linear equation branch handled by the all-free pattern below
  } else if (set_part_is_box_like(c)) {
    box = set_part_box(c, n);
  } else {
    throw std::invalid_argument("avi_solve: set part must be zero, box or KKT cone");
  }

  // count enumeration states per coordinate
  std::vector<std::vector<CoordState>> states(static_cast<std::size_t>(n));
  double total_patterns = 1.0;
  for (Index i = 0; i < n; ++i) {
    auto& st = states[static_cast<std::size_t>(i)];
    st.push_back(CoordState::Free);
    if (std::isfinite(box.lower(i))) st.push_back(CoordState::AtLower);
    if (std::isfinite(box.upper(i)) && box.upper(i) != box.lower(i)) st.push_back(CoordState::AtUpper);
    total_patterns *= static_cast<double>(st.size());
  }
  if (total_patterns > (1u << 20)) throw CapExceeded("avi_solve: bound coordinate cap (2^20 patterns)");

  const double eps = 1e-10;
  double best_dist = kInf;
  std::optional<Vector> best;

  std::vector<std::size_t> choice(static_cast<std::size_t>(n), 0);
  bool done = n == 0;
  while (!done) {
    // assemble pattern
    std::vector<Index> free_idx, fixed_idx;
    Vector fixed_val(n);
    for (Index i = 0; i < n; ++i) {
      switch (states[static_cast<std::size_t>(i)][choice[static_cast<std::size_t>(i)]]) {
        case CoordState::Free:
          free_idx.push_back(i);
          break;
        case CoordState::AtLower:
          fixed_idx.push_back(i);
          fixed_val(i) = box.lower(i);
          break;
        case CoordState::AtUpper:
          fixed_idx.push_back(i);
          fixed_val(i) = box.upper(i);
          break;
      }
    }

    const Index nf = static_cast<Index>(free_idx.size());
    Matrix mff(nf, nf);
    Vector rhs(nf);
    for (Index a = 0; a < nf; ++a) {
      double acc = q(free_idx[static_cast<std::size_t>(a)]);
      for (Index i : fixed_idx) acc += m(free_idx[static_cast<std::size_t>(a)], i) * fixed_val(i);
      rhs(a) = -acc;
      for (Index bcol = 0; bcol < nf; ++bcol)
        mff(a, bcol) = m(free_idx[static_cast<std::size_t>(a)], free_idx[static_cast<std::size_t>(bcol)]);
    }
    Vector nearest_free(nf);
    for (Index a = 0; a < nf; ++a) nearest_free(a) = nearest_to(free_idx[static_cast<std::size_t>(a)]);

    const auto zf = nearest_consistent_solution(mff, rhs, nearest_free);
    if (zf) {
      Vector z(n);
      for (Index i : fixed_idx) z(i) = fixed_val(i);
      for (Index a = 0; a < nf; ++a) z(free_idx[static_cast<std::size_t>(a)]) = (*zf)(a);

      const Vector w = q + m * z;  // -w must lie in N_C(z)
      bool valid = true;
      for (Index i = 0; i < n && valid; ++i) {
        switch (states[static_cast<std::size_t>(i)][choice[static_cast<std::size_t>(i)]]) {
          case CoordState::Free:
            if (std::abs(w(i)) > eps) valid = false;
            if (z(i) < box.lower(i) - eps || z(i) > box.upper(i) + eps) valid = false;
            break;
          case CoordState::AtLower:
            if (w(i) < -eps) valid = false;  // N at lower is R_-, need w >= 0
            break;
          case CoordState::AtUpper:
            if (w(i) > eps) valid = false;  // N at upper is R_+, need w <= 0
            break;
        }
      }
      if (valid) {
        const double dist = (z - nearest_to).norm();
        if (dist < best_dist) {
          best_dist = dist;
          best = z;
        }
      }
    }

    // advance the mixed-radix counter
    Index pos = 0;
    while (pos < n) {
      auto& c_ = choice[static_cast<std::size_t>(pos)];
      if (++c_ < states[static_cast<std::size_t>(pos)].size()) break;
      c_ = 0;
      ++pos;
    }
    if (pos == n) done = true;
  }

  if (n == 0) return Vector(0);
  return best;
}

}  // namespace subreg
