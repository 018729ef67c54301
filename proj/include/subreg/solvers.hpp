#pragma once

#include "subreg/geq.hpp"

#include <optional>
#include <string>
#include <vector>

namespace subreg {

enum class SolveStatus { Converged, Stalled, BudgetExhausted, SubproblemFailed };

const char* to_string(SolveStatus s);

struct NewtonConfig {
  int max_iter = 50;
  double residual_tol = 1e-12;
  double step_tol = 1e-14;
  Vector perturbation_p;  // empty means zero
  enum class Subproblem { ExactAvi, InnerSemismooth } subproblem = Subproblem::ExactAvi;
};

struct SolveReport {
  std::vector<Vector> iterates;
  std::vector<double> residuals;            // raw, not required monotone
  std::vector<double> errors_to_reference;  // empty when xbar unknown
  SolveStatus status = SolveStatus::BudgetExhausted;
  std::optional<double> order_fit;
  std::vector<double> dennis_more_trace;
  std::string diagnostic;
  int skipped_updates = 0;

  const Vector& final_iterate() const { return iterates.back(); }
};

/// Newton-Josephy iteration: each step solves the partial linearization
/// f(x_k) + Df(x_k)(x - x_k) + F(x) ∋ ybar + p exactly.
SolveReport josephy_newton(const GeneralizedEquation& ge, const Vector& x0, const NewtonConfig& cfg = {});

/// Semismooth Newton on the natural map with a Bouligand-Jacobian selection.
SolveReport semismooth_newton(const GeneralizedEquation& ge, const Vector& x0, const NewtonConfig& cfg = {});

using ResidualSchedule = std::function<Vector(const Vector&, int)>;

/// Quasi-Newton iteration with good Broyden updates and an inexactness term
/// r_k; dennis_more_trace records the Dennis-More quotient when xbar is known.
SolveReport broyden_inexact_newton(const GeneralizedEquation& ge, const Vector& x0, Matrix b0,
                                   const ResidualSchedule& rk, const NewtonConfig& cfg = {});

/// Least-squares slope of log e_{k+1} against log e_k over the last (up to 4)
/// consecutive pairs inside (1e-15, 1e-2); nullopt when fewer than 2 pairs.
std::optional<double> convergence_order_estimate(const std::vector<double>& errors);

struct PerturbedSample {
  Vector p;
  Vector u;
};

struct PerturbedCheck {
  double worst_violation = -kInf;
  int skipped_samples = 0;
  std::vector<double> margins;
};

/// Empirical check of the Newton-sequence bound sup_k |x_k - xbar| <=
/// gamma |u - xbar| + lambda |p| over the given samples.
PerturbedCheck perturbed_sequence_check(const GeneralizedEquation& ge,
                                        const std::vector<PerturbedSample>& samples, double gamma,
                                        double lambda, const NewtonConfig& cfg = {});

}  // namespace subreg
