#pragma once

#include <Eigen/Dense>

#include <limits>
#include <optional>
#include <stdexcept>

namespace subreg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Thrown when an enumeration-based routine is asked to exceed its hard size cap.
struct CapExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace tol {
// relative pivot cutoff for singularity in solve_linear
inline constexpr double pivot_rel = 1e-12;
// rank decisions against the largest singular value
inline constexpr double rank_rel = 1e-9;
// symmetry check in symmetric_eigen_extremes
inline constexpr double symmetry = 1e-12;
// activity / feasibility tolerance for polyhedral computations
inline constexpr double active = 1e-10;
}  // namespace tol

struct SingularTriple {
  double value = 0.0;
  Vector right;  // unit h attaining min ||A h||_2
  Vector left;   // A * right = value * left
};

struct EigenExtremes {
  double lambda_min = 0.0;
  Vector v_min;
  double lambda_max = 0.0;
  Vector v_max;
};

/// Solves A x = b with a partially pivoted LU factorization.
/// Returns nullopt when the factorization hits a relative pivot below 1e-12.
std::optional<Vector> solve_linear(const Matrix& A, const Vector& b);

/// Orthonormal basis of {x : A x = 0}; rank decided at relative tolerance 1e-9.
/// A matrix with zero rows has the full identity-spanned nullspace.
Matrix nullspace_basis(const Matrix& A);

/// Orthonormal basis of the row space of A (complement of the nullspace).
Matrix rowspace_basis(const Matrix& A);

/// Numerical rank at relative tolerance 1e-9.
Index numerical_rank(const Matrix& A);

/// Smallest singular value with attaining right/left vectors.  Requires rows >= cols.
SingularTriple smallest_singular_value(const Matrix& A);

/// Extreme eigenpairs of a symmetric matrix.  Throws on non-symmetric input.
EigenExtremes symmetric_eigen_extremes(const Matrix& A);

}  // namespace subreg
