#pragma once

#include <Eigen/Dense>

#include "fhsc/rng.hpp"

namespace fhsc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Factorization of a symmetric positive (semi-)definite matrix: Cholesky first,
// falling back to an eigendecomposition with eigenvalues clipped at
// 1e-12 * max|eigenvalue| when the Cholesky fails.
class SymmetricFactor {
 public:
  explicit SymmetricFactor(const Matrix& a);

  Vector solve(const Vector& b) const;
  Matrix solve(const Matrix& b) const;
  double log_det() const;
  bool clipped() const { return clipped_; }

  // Draw from N(mean, A^-1) when the factored matrix A is a precision matrix.
  Vector sample_from_precision(const Vector& mean, Rng& rng) const;
  // Draw from N(mean, A) when the factored matrix A is a covariance matrix.
  Vector sample_from_covariance(const Vector& mean, Rng& rng) const;

  // Diagonal of A^-1 and A^-1 * 1 (used for the smoothed conditional variance).
  Vector inverse_diagonal() const;
  Vector solve_ones() const;

 private:
  Eigen::LLT<Matrix> llt_;
  bool use_llt_ = false;
  bool clipped_ = false;
  int n_ = 0;
  // Fallback pieces: A ~= Q diag(lam) Q^T with lam clipped from below.
  Matrix q_;
  Vector lam_;
};

}  // namespace fhsc
