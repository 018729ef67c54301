#include "subreg/numerics.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace subreg {

std::optional<Vector> solve_linear(const Matrix& A, const Vector& b) {
  if (A.rows() != A.cols()) throw std::invalid_argument("solve_linear: A must be square");
  if (A.cols() != b.size()) throw std::invalid_argument("solve_linear: dimension mismatch");
  if (A.rows() == 0) return Vector(0);

  Eigen::PartialPivLU<Matrix> lu(A);
  const Vector diag = lu.matrixLU().diagonal().cwiseAbs();
  const double largest = diag.maxCoeff();
  if (largest <= 0.0 || diag.minCoeff() <= tol::pivot_rel * largest) return std::nullopt;
  return lu.solve(b);
}

Matrix nullspace_basis(const Matrix& A) {
  if (A.rows() == 0 || A.cols() == 0) return Matrix::Identity(A.cols(), A.cols());
  Eigen::JacobiSVD<Matrix> svd(A, Eigen::ComputeFullV);
  const Vector s = svd.singularValues();
  const double cutoff = tol::rank_rel * s(0);
  Index rank = 0;
  while (rank < s.size() && s(rank) > cutoff) ++rank;
  return svd.matrixV().rightCols(A.cols() - rank);
}

Matrix rowspace_basis(const Matrix& A) {
  if (A.rows() == 0 || A.cols() == 0) return Matrix(A.cols(), 0);
  Eigen::JacobiSVD<Matrix> svd(A, Eigen::ComputeFullV);
  const Vector s = svd.singularValues();
  const double cutoff = tol::rank_rel * std::max(s(0), 0.0);
  Index rank = 0;
  while (rank < s.size() && s(rank) > cutoff) ++rank;
  return svd.matrixV().leftCols(rank);
}

Index numerical_rank(const Matrix& A) {
  if (A.rows() == 0 || A.cols() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(A);
  const Vector s = svd.singularValues();
  if (s.size() == 0 || s(0) <= 0.0) return 0;
  const double cutoff = tol::rank_rel * s(0);
  Index rank = 0;
  while (rank < s.size() && s(rank) > cutoff) ++rank;
  return rank;
}

SingularTriple smallest_singular_value(const Matrix& A) {
  if (A.rows() < A.cols()) throw std::invalid_argument("smallest_singular_value: needs rows >= cols");
  if (A.cols() == 0) throw std::invalid_argument("smallest_singular_value: empty matrix");
  Eigen::JacobiSVD<Matrix> svd(A, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Index last = A.cols() - 1;
  SingularTriple out;
  out.value = svd.singularValues()(last);
  out.right = svd.matrixV().col(last);
  out.left = svd.matrixU().col(last);
  return out;
}

EigenExtremes symmetric_eigen_extremes(const Matrix& A) {
  if (A.rows() != A.cols()) throw std::invalid_argument("symmetric_eigen_extremes: A must be square");
  const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
  if ((A - A.transpose()).cwiseAbs().maxCoeff() > tol::symmetry * scale)
    throw std::invalid_argument("symmetric_eigen_extremes: A not symmetric");

  Eigen::SelfAdjointEigenSolver<Matrix> es(A);
  EigenExtremes out;
  out.lambda_min = es.eigenvalues()(0);
  out.v_min = es.eigenvectors().col(0);
  out.lambda_max = es.eigenvalues()(A.rows() - 1);
  out.v_max = es.eigenvectors().col(A.rows() - 1);
  return out;
}

}  // namespace subreg
