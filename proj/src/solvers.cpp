#include "subreg/solvers.hpp"

#include <cmath>

namespace subreg {

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::Stalled: return "stalled";
    case SolveStatus::BudgetExhausted: return "budget-exhausted";
    case SolveStatus::SubproblemFailed: return "subproblem-failed";
  }
  return "unknown";
}

namespace {

Vector perturbation_of(const NewtonConfig& cfg, Index dim_out) {
  if (cfg.perturbation_p.size() == 0) return Vector::Zero(dim_out);
  if (cfg.perturbation_p.size() != dim_out)
    throw std::invalid_argument("NewtonConfig: perturbation dimension mismatch");
  return cfg.perturbation_p;
}

void validate(const NewtonConfig& cfg) {
  if (cfg.max_iter < 1 || cfg.residual_tol <= 0.0 || cfg.step_tol <= 0.0)
    throw std::invalid_argument("NewtonConfig: tolerances must be positive, max_iter >= 1");
}

void record(SolveReport& rep, const GeneralizedEquation& ge, const Vector& x, double residual) {
  rep.iterates.push_back(x);
  rep.residuals.push_back(residual);
  if (ge.reference_point) rep.errors_to_reference.push_back((x - *ge.reference_point).norm());
}

void finish(SolveReport& rep) {
  if (!rep.errors_to_reference.empty()) rep.order_fit = convergence_order_estimate(rep.errors_to_reference);
}

// Inner semismooth iteration for the AVI 0 in q + M z + N_C(z).
std::optional<Vector> avi_inner_semismooth(const Matrix& m, const Vector& q, const SetPart& c,
                                           const Vector& start) {
  const Index n = m.rows();
  const Box box = std::holds_alternative<ZeroMap>(c) ? Box::whole_space(n) : set_part_box(c, n);
  Vector z = start;
  for (int it = 0; it < 100; ++it) {
    const Vector w = q + m * z;
    const Vector phi = z - project_box(z - w, box);
    if (phi.cwiseAbs().maxCoeff() <= 1e-12) return z;
    const Vector s = z - w;
    Matrix jac(n, n);
    for (Index i = 0; i < n; ++i) {
      const bool below = std::isfinite(box.lower(i)) && s(i) < box.lower(i) - 1e-12;
      const bool above = std::isfinite(box.upper(i)) && s(i) > box.upper(i) + 1e-12;
      if (below || above)
        jac.row(i) = Vector::Unit(n, i).transpose();
      else
        jac.row(i) = m.row(i);
    }
    const auto step = solve_linear(jac, Vector(-phi));
    if (!step) return std::nullopt;
    z += *step;
    if (step->norm() <= 1e-15) break;
  }
  const Vector w = q + m * z;
  if ((z - project_box(z - w, box)).cwiseAbs().maxCoeff() <= 1e-10) return z;
  return std::nullopt;
}

std::optional<Vector> solve_subproblem(const Matrix& m, const Vector& q, const SetPart& c,
                                       const Vector& nearest, NewtonConfig::Subproblem kind) {
  if (kind == NewtonConfig::Subproblem::InnerSemismooth && !std::holds_alternative<ZeroMap>(c))
    return avi_inner_semismooth(m, q, c, nearest);
  return avi_solve(m, q, c, nearest);
}

}  // namespace

SolveReport josephy_newton(const GeneralizedEquation& ge, const Vector& x0, const NewtonConfig& cfg) {
  validate(cfg);
  const Vector p = perturbation_of(cfg, ge.smooth.dim_out);
  SolveReport rep;

  Vector x = x0;
  double res = residual_distance_shifted(ge, x, p);
  record(rep, ge, x, res);
  if (res <= cfg.residual_tol) {
    rep.status = SolveStatus::Converged;
    finish(rep);
    return rep;
  }

  for (int k = 0; k < cfg.max_iter; ++k) {
    const Matrix jf = ge.smooth.jacobian(x);
    // 0 in [f(x_k) - Jf x_k - ybar - p] + Jf z + F(z)
    const Vector q = ge.smooth(x) - jf * x - ge.reference_value - p;
    const auto next = solve_subproblem(jf, q, ge.set_part, x, cfg.subproblem);
    if (!next) {
      rep.status = SolveStatus::SubproblemFailed;
      rep.diagnostic = "avi_solve found no solution at iteration " + std::to_string(k);
      finish(rep);
      return rep;
    }
    const double step = (*next - x).norm();
    x = *next;
    res = residual_distance_shifted(ge, x, p);
    record(rep, ge, x, res);
    if (res <= cfg.residual_tol) {
      rep.status = SolveStatus::Converged;
      finish(rep);
      return rep;
    }
    if (step <= cfg.step_tol) {
      rep.status = SolveStatus::Stalled;
      rep.diagnostic = "step below step_tol with residual above residual_tol";
      finish(rep);
      return rep;
    }
  }
  rep.status = SolveStatus::BudgetExhausted;
  finish(rep);
  return rep;
}

SolveReport semismooth_newton(const GeneralizedEquation& ge, const Vector& x0, const NewtonConfig& cfg) {
  validate(cfg);
  if (!set_part_is_box_like(ge.set_part))
    throw std::invalid_argument("semismooth_newton: set part must be a box or KKT normal cone");
  SolveReport rep;

  Vector x = x0;
  Vector phi = natural_map(ge, x);
  record(rep, ge, x, phi.cwiseAbs().maxCoeff());
  if (rep.residuals.back() <= cfg.residual_tol) {
    rep.status = SolveStatus::Converged;
    finish(rep);
    return rep;
  }

  for (int k = 0; k < cfg.max_iter; ++k) {
    const Matrix ak = b_jacobian_natural_map(ge, x);
    const auto step = solve_linear(ak, Vector(-phi));
    if (!step) {
      rep.status = SolveStatus::Stalled;
      rep.diagnostic = "singular Bouligand selection at iteration " + std::to_string(k);
      finish(rep);
      return rep;
    }
    x += *step;
    phi = natural_map(ge, x);
    record(rep, ge, x, phi.cwiseAbs().maxCoeff());
    if (rep.residuals.back() <= cfg.residual_tol) {
      rep.status = SolveStatus::Converged;
      finish(rep);
      return rep;
    }
    if (step->norm() <= cfg.step_tol) {
      rep.status = SolveStatus::Stalled;
      rep.diagnostic = "step below step_tol with residual above residual_tol";
      finish(rep);
      return rep;
    }
  }
  rep.status = SolveStatus::BudgetExhausted;
  finish(rep);
  return rep;
}

SolveReport broyden_inexact_newton(const GeneralizedEquation& ge, const Vector& x0, Matrix b0,
                                   const ResidualSchedule& rk, const NewtonConfig& cfg) {
  validate(cfg);
  if (b0.rows() != ge.smooth.dim_out || b0.cols() != ge.smooth.dim_in)
    throw std::invalid_argument("broyden_inexact_newton: B0 dimension mismatch");
  const Vector p = perturbation_of(cfg, ge.smooth.dim_out);
  SolveReport rep;

  const bool have_ref = ge.reference_point.has_value();
  Matrix df_ref;
  if (have_ref) df_ref = ge.smooth.jacobian(*ge.reference_point);

  Vector x = x0;
  Matrix bk = std::move(b0);
  double res = residual_distance_shifted(ge, x, p);
  record(rep, ge, x, res);
  if (res <= cfg.residual_tol) {
    rep.status = SolveStatus::Converged;
    finish(rep);
    return rep;
  }

  for (int k = 0; k < cfg.max_iter; ++k) {
    const Vector inexact = rk ? rk(x, k) : Vector::Zero(ge.smooth.dim_out);
    const Vector q = ge.smooth(x) + inexact - bk * x - ge.reference_value - p;
    const auto next = solve_subproblem(bk, q, ge.set_part, x, cfg.subproblem);
    if (!next) {
      rep.status = SolveStatus::SubproblemFailed;
      rep.diagnostic = "subproblem failed at iteration " + std::to_string(k);
      finish(rep);
      return rep;
    }
    const Vector dx = *next - x;
    const double step = dx.norm();
    if (have_ref && step > 0.0)
      rep.dennis_more_trace.push_back(((df_ref - bk) * dx).norm() / step + inexact.norm() / step);

    const Vector fx = ge.smooth(x);
    x = *next;
    const Vector df = ge.smooth(x) - fx;
    if (step >= 1e-14) {
      bk += (df - bk * dx) * dx.transpose() / dx.squaredNorm();
    } else {
      ++rep.skipped_updates;
    }

    res = residual_distance_shifted(ge, x, p);
    record(rep, ge, x, res);
    if (res <= cfg.residual_tol) {
      rep.status = SolveStatus::Converged;
      finish(rep);
      return rep;
    }
    if (step <= cfg.step_tol) {
      rep.status = SolveStatus::Stalled;
      rep.diagnostic = "step below step_tol with residual above residual_tol";
      finish(rep);
      return rep;
    }
  }
  rep.status = SolveStatus::BudgetExhausted;
  finish(rep);
  return rep;
}

std::optional<double> convergence_order_estimate(const std::vector<double>& errors) {
  constexpr double floor = 1e-15;
  constexpr double ceiling = 1e-2;
  std::vector<std::pair<double, double>> pairs;  // (log e_k, log e_{k+1})
  for (std::size_t k = 0; k + 1 < errors.size(); ++k) {
    const double a = errors[k], b = errors[k + 1];
    if (a > floor && a < ceiling && b > floor && b < ceiling)
      pairs.emplace_back(std::log(a), std::log(b));
  }
  if (pairs.size() < 2) return std::nullopt;
  if (pairs.size() > 4) pairs.erase(pairs.begin(), pairs.end() - 4);

  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(pairs.size());
  for (const auto& [x, y] : pairs) {
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double denom = n * sxx - sx * sx;
  if (std::abs(denom) < 1e-12) return std::nullopt;
  return (n * sxy - sx * sy) / denom;
}

PerturbedCheck perturbed_sequence_check(const GeneralizedEquation& ge,
                                        const std::vector<PerturbedSample>& samples, double gamma,
                                        double lambda, const NewtonConfig& cfg) {
  if (!ge.reference_point) throw std::invalid_argument("perturbed_sequence_check: xbar must be known");
  const Vector& xbar = *ge.reference_point;

  PerturbedCheck out;
  for (const auto& sample : samples) {
    NewtonConfig run_cfg = cfg;
    run_cfg.perturbation_p = sample.p;
    SolveReport rep = josephy_newton(ge, sample.u, run_cfg);
    if (rep.status == SolveStatus::SubproblemFailed || rep.status == SolveStatus::Stalled) {
      ++out.skipped_samples;
      continue;
    }
    double sup = 0.0;
    for (const Vector& xk : rep.iterates) sup = std::max(sup, (xk - xbar).norm());
    const double margin = sup - (gamma * (sample.u - xbar).norm() + lambda * sample.p.norm());
    out.margins.push_back(margin);
    out.worst_violation = std::max(out.worst_violation, margin);
  }
  if (out.margins.empty()) out.worst_violation = kInf;
  return out;
}

}  // namespace subreg
