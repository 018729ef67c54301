#pragma once

#include "subreg/geq.hpp"
#include "subreg/rng.hpp"

#include <cstdint>
#include <vector>

namespace subreg {

enum class EstimateKind { Exact, SampledLower, SampledUpper };
enum class NormKind { L2, Linf };

const char* to_string(EstimateKind k);
const char* to_string(NormKind n);

struct ModulusEstimate {
  double value = 0.0;  // +inf for "not strongly subregular"
  EstimateKind kind = EstimateKind::SampledLower;
  double q_exponent = 1.0;
  NormKind domain_norm = NormKind::L2;
  NormKind codomain_norm = NormKind::L2;
  std::vector<double> radii;
  std::vector<double> per_radius;  // rate (or sup) observed at each radius
  bool divergence_flag = false;    // per-radius values grew by > 10x
};

struct LinearMapAnalysis {
  double sigma_min = 0.0;  // min ||A h||_cod over the unit domain sphere
  bool injective = false;
  double modulus = kInf;  // 1/sigma_min in the requested norms
  double subreg_modulus_l2 = kInf;
  double graphical_outer_norm = kInf;        // l2/l2, independent route
  double frechet_coderiv_inner_norm = kInf;  // l2/l2, independent route
  NormKind domain_norm = NormKind::L2;
  NormKind codomain_norm = NormKind::L2;
};

struct DerivativeFamily {
  std::vector<Matrix> operators;
  double approximation_constant_c = 0.0;
  double chi_upper_bound = 0.0;  // 0 for finite families
};

struct AffineApproximation {  // h(x) = q + M x
  Matrix m;
  Vector q;
  Vector operator()(const Vector& x) const { return q + m * x; }
};

/// Samples the steepest displacement rate liminf d(ybar, f(x)+F(x))/|x-xbar|
/// over shrinking spheres; modulus = 1/rate by reciprocity.
ModulusEstimate displacement_rate_sample(const GeneralizedEquation& ge, const std::vector<double>& radii,
                                         std::uint64_t seed = kDefaultSeed, int samples_per_radius = 10000);

/// Injectivity-type moduli of a linear map in the requested norm pair plus the
/// l2 norm-chain quantities computed along three independent routes.
LinearMapAnalysis linear_map_moduli(const Matrix& a, NormKind domain_norm, NormKind codomain_norm);

/// True iff the homogenized variational inequality 0 in M w + N_K(w) over the
/// critical cone K of C at xbar for ybar - h(xbar) has only the zero solution.
bool polyhedral_isolated_point_test(const AffineApproximation& h, const SetPart& c, const Vector& xbar,
                                    const Vector& ybar);

/// Largest |w_j| over box-capped sign-feasible solutions of 0 in M w + N_K(w);
/// zero (up to 1e-8) certifies that w = 0 is the unique solution.
double homogeneous_avi_nonzero_witness(const Matrix& m, const PolyhedralCone& k);

/// Outer norm of the inverse graphical derivative of h + F_C at (xbar, ybar),
/// in the linf/linf norm pair; +inf when the isolated-point test fails.
double graphical_derivative_outer_norm(const AffineApproximation& h, const SetPart& c, const Vector& xbar,
                                       const Vector& ybar);

/// Inner norm of the inverse Frechet coderivative of a linear map:
/// 1/sigma_min(A) when A is injective, +inf otherwise.
double coderivative_inner_norm_linear(const Matrix& a);

/// Same quantity for F(x) = {A_1 x, ..., A_k x}; the Frechet normal cone of a
/// union of linear graphs through the origin is the orthogonal complement of
/// their span, which this routine evaluates exactly.
double coderivative_inner_norm_union_of_linear(const std::vector<Matrix>& maps);

/// Sampled q-subregularity modulus sup |x-xbar| / d(ybar,F(x))^q over spheres.
ModulusEstimate q_subreg_estimate(const GeneralizedEquation& ge, double q, const std::vector<double>& radii,
                                  std::uint64_t seed = kDefaultSeed, int samples_per_radius = 10000);

struct PerturbationBound {
  double bound = 0.0;
  bool holds = false;
};

/// bound = kappa/(1-kappa*mu) for q=1, kappa/(1-kappa^{1/q} mu)^q otherwise;
/// throws when kappa*mu^q >= 1.
PerturbationBound perturbation_bound_check(double kappa, double mu, double estimated_sum_modulus,
                                           double q = 1.0);

struct ClarkeSufficiency {
  bool sufficient = false;
  double modulus_bound = kInf;
  int hull_samples_checked = 0;
  bool vertex_and_sampled = false;  // verdict covers vertices plus sampled hull points only
};

/// Vertex-wise sufficiency check for strong subregularity of f + F via the
/// linearizations H_A; optional random convex-hull samples narrow the gap to
/// the full Clarke-Jacobian quantification.
ClarkeSufficiency clarke_sufficiency_check(const DerivativeFamily& family, const Vector& f_at_xbar,
                                           const SetPart& c, const Vector& xbar, const Vector& ybar,
                                           int hull_samples = 0, std::uint64_t seed = kDefaultSeed);

struct RadiusLinear {
  double radius = 0.0;
  Matrix worst_b;
};

/// Distance to non-injectivity with rank-one attainment (Eckart-Young form).
RadiusLinear radius_linear(const Matrix& a);

struct RadiusVariational {
  double sigma = 0.0;  // min <x, Ax> over K intersect unit sphere; +inf for K = {0}
  Vector x_star;
  Matrix worst_b;
  bool positive_on_cone = false;
};

/// Cone-constrained quadratic minimum via face-restricted eigen candidates,
/// multi-start projected gradient, and (dim <= 4) polished dense sampling;
/// the routes must agree or the routine throws.
RadiusVariational radius_variational(const Matrix& a, const PolyhedralCone& k,
                                     std::uint64_t seed = kDefaultSeed);

/// Sampled inf-sup slope estimate of the reciprocal subregularity modulus
/// using the rho-weighted product norm on graph samples.
double nonlocal_slope_estimate(const GeneralizedEquation& ge, double rho, int shrink_steps,
                               std::uint64_t seed = kDefaultSeed);

struct ParametricGE {
  Index dim_p = 0;
  Index dim_x = 0;
  Index dim_out = 0;
  std::function<Vector(const Vector& p, const Vector& x)> f;
  std::function<Matrix(const Vector& p, const Vector& x)> df_dx;
  std::function<Matrix(const Vector& p, const Vector& x)> df_dp;
  SetPart set_part;
  Vector pbar;
  Vector xbar;

  GeneralizedEquation at(const Vector& p) const;
};

struct CalmnessCheck {
  double clm_estimate = 0.0;
  double bound = 0.0;
  bool holds = false;
  int skipped_samples = 0;
};

/// Samples clm(S; pbar|xbar) against the bound subreg(h+F) * |D_p f| from the
/// parametric implicit-function estimate (linf norms).
CalmnessCheck parametric_calmness_check(const ParametricGE& pge, int samples,
                                        std::uint64_t seed = kDefaultSeed);

}  // namespace subreg
