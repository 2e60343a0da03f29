#include "fhsc/linalg.hpp"

#include <cmath>

#include "fhsc/error.hpp"

namespace fhsc {

SymmetricFactor::SymmetricFactor(const Matrix& a) : n_(static_cast<int>(a.rows())) {
  if (a.rows() != a.cols()) throw_numeric("SymmetricFactor: matrix not square");
  llt_.compute(a);
  if (llt_.info() == Eigen::Success && (llt_.matrixLLT().diagonal().array() > 0.0).all()) {
    use_llt_ = true;
    return;
  }
  log_warning("Cholesky failed; falling back to eigen-clipped factorization");
  Eigen::SelfAdjointEigenSolver<Matrix> es(a);
  if (es.info() != Eigen::Success) throw_numeric("eigendecomposition failed in SymmetricFactor");
  q_ = es.eigenvectors();
  lam_ = es.eigenvalues();
  const double floor = 1e-12 * std::max(1.0, lam_.cwiseAbs().maxCoeff());
  for (int i = 0; i < lam_.size(); ++i) {
    if (lam_[i] < floor) {
      lam_[i] = floor;
      clipped_ = true;
    }
  }
}

Vector SymmetricFactor::solve(const Vector& b) const {
  if (use_llt_) return llt_.solve(b);
  return q_ * (q_.transpose() * b).cwiseQuotient(lam_);
}

Matrix SymmetricFactor::solve(const Matrix& b) const {
  if (use_llt_) return llt_.solve(b);
  return q_ * lam_.cwiseInverse().asDiagonal() * (q_.transpose() * b);
}

double SymmetricFactor::log_det() const {
  if (use_llt_) return 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
  return lam_.array().log().sum();
}

Vector SymmetricFactor::sample_from_precision(const Vector& mean, Rng& rng) const {
  Vector z(n_);
  for (int i = 0; i < n_; ++i) z[i] = rng.normal();
  if (use_llt_) {
    // M = L L^T, so L^-T z has covariance M^-1.
    return mean + llt_.matrixU().solve(z);
  }
  return mean + q_ * z.cwiseQuotient(lam_.cwiseSqrt());
}

Vector SymmetricFactor::sample_from_covariance(const Vector& mean, Rng& rng) const {
  Vector z(n_);
  for (int i = 0; i < n_; ++i) z[i] = rng.normal();
  if (use_llt_) return mean + llt_.matrixL() * z;
  return mean + q_ * lam_.cwiseSqrt().cwiseProduct(z);
}

Vector SymmetricFactor::inverse_diagonal() const {
  if (use_llt_) {
    // M^-1 = L^-T L^-1, so (M^-1)_jj = || column j of L^-1 ||^2.
    Matrix linv = llt_.matrixL().solve(Matrix::Identity(n_, n_));
    return linv.colwise().squaredNorm().transpose();
  }
  Vector d(n_);
  for (int j = 0; j < n_; ++j) d[j] = (q_.row(j).transpose().array().square() / lam_.array()).sum();
  return d;
}

Vector SymmetricFactor::solve_ones() const { return solve(Vector::Ones(n_).eval()); }

}  // namespace fhsc
