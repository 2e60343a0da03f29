#include "fhsc/model.hpp"

#include <cmath>

#include "fhsc/error.hpp"

namespace fhsc {

ModelVariant ModelVariant::from_name(const std::string& name) {
  ModelVariant v;
  v.name = name;
  if (name == "fh") {
    v = {name, BetaSharing::Common, VarianceSharing::Common, ZStructure::Identity, RhoMode::FixedOne};
  } else if (name == "fh-c1") {
    v = {name, BetaSharing::Common, VarianceSharing::PerCluster, ZStructure::CommonEffect, RhoMode::FixedOne};
  } else if (name == "fh-c2") {
    v = {name, BetaSharing::PerCluster, VarianceSharing::PerCluster, ZStructure::ClusterPlusArea, RhoMode::FixedOne};
  } else if (name == "fh-sc1") {
    v = {name, BetaSharing::Common, VarianceSharing::Common, ZStructure::Identity, RhoMode::Free};
  } else if (name == "fh-sc2") {
    v = {name, BetaSharing::Common, VarianceSharing::PerCluster, ZStructure::CommonEffect, RhoMode::Free};
  } else if (name == "fh-sc3") {
    v = {name, BetaSharing::PerCluster, VarianceSharing::PerCluster, ZStructure::ClusterPlusArea, RhoMode::Free};
  } else {
    throw_validation("unknown model variant '" + name +
                     "' (expected fh, fh-c1, fh-c2, fh-sc1, fh-sc2, fh-sc3)");
  }
  return v;
}

void ModelVariant::validate() const {
  if (z_structure == ZStructure::ClusterPlusArea && !(gamma_hat > 0.0))
    throw_validation("variant '" + name + "' requires gamma_hat > 0 (supplied externally)");
  if (!(ridge_scale > 0.0)) throw_validation("ridge_scale must be positive");
}

void ClusterBlock::validate() const {
  const int n = size();
  if (n == 0) throw_validation("empty cluster block");
  if (d.size() != n || x.rows() != n) throw_validation("cluster block dimension mismatch");
  if ((d.array() <= 0.0).any()) throw_validation("cluster block has nonpositive variances");
}

double cluster_gamma(double rho, int n_c) {
  if (!(rho > 0.0) || rho > 1.0) throw_validation("rho must lie in (0, 1]");
  return rho / ((1.0 - rho) * n_c + rho);
}

Vector apply_A(const Vector& v, double rho) {
  if (!(rho > 0.0) || rho > 1.0) throw_validation("rho must lie in (0, 1]");
  const int n = static_cast<int>(v.size());
  const double f = (1.0 - rho) / rho;
  // L v = n v - sum(v) 1
  return v + f * (n * v.array() - v.sum()).matrix();
}

Vector apply_A_inv(const Vector& v, double rho) {
  const int n = static_cast<int>(v.size());
  const double g = cluster_gamma(rho, n);
  const double mean = v.mean();
  return (g * v.array() + (1.0 - g) * mean).matrix();
}

Vector apply_A_blocks(const Vector& v, double rho, const Clustering& clustering) {
  Vector out(v.size());
  for (const auto& members : clustering.members) {
    Vector sub(members.size());
    for (size_t j = 0; j < members.size(); ++j) sub[static_cast<int>(j)] = v[members[j]];
    const Vector res = apply_A(sub, rho);
    for (size_t j = 0; j < members.size(); ++j) out[members[j]] = res[static_cast<int>(j)];
  }
  return out;
}

Vector apply_A_inv_blocks(const Vector& v, double rho, const Clustering& clustering) {
  Vector out(v.size());
  for (const auto& members : clustering.members) {
    Vector sub(members.size());
    for (size_t j = 0; j < members.size(); ++j) sub[static_cast<int>(j)] = v[members[j]];
    const Vector res = apply_A_inv(sub, rho);
    for (size_t j = 0; j < members.size(); ++j) out[members[j]] = res[static_cast<int>(j)];
  }
  return out;
}

double log_det_A(double rho, int n_c) {
  // Eigenvalues of A: 1 (once) and 1/gamma_c (n_c - 1 times).
  return -(n_c - 1) * std::log(cluster_gamma(rho, n_c));
}

PriorCov PriorCov::make(const ModelVariant& variant, double sigma2, int n_c) {
  if (!(sigma2 > 0.0)) throw_numeric("prior variance must be positive");
  PriorCov p;
  p.sigma2 = sigma2;
  p.n = n_c;
  switch (variant.z_structure) {
    case ZStructure::Identity:
      p.a = 1.0;
      p.b = 0.0;
      break;
    case ZStructure::CommonEffect:
      p.a = variant.ridge_scale;
      p.b = 1.0;
      break;
    case ZStructure::ClusterPlusArea:
      p.a = 1.0;
      p.b = variant.gamma_hat;
      break;
  }
  return p;
}

Matrix PriorCov::dense() const {
  Matrix m = Matrix::Constant(n, n, sigma2 * b);
  m.diagonal().array() += sigma2 * a;
  return m;
}

Vector PriorCov::solve(const Vector& v) const {
  // (a I + b 1 1^T)^-1 = (1/a)(I - b/(a + b n) 1 1^T)
  const double s = v.sum();
  return (v.array() - (b / (a + b * n)) * s).matrix() / (sigma2 * a);
}

double PriorCov::quad(const Vector& v) const { return v.dot(solve(v)); }

double PriorCov::log_det() const {
  return n * std::log(sigma2) + (n - 1) * std::log(a) + std::log(a + b * n);
}

ConditionalMoments conditional_moments(const ClusterBlock& block, const Vector& delta_c,
                                       const PriorCov& prior, double rho) {
  block.validate();
  const int n = block.size();
  if (prior.n != n) throw_validation("prior covariance size mismatch");
  if (delta_c.size() != block.x.cols()) throw_validation("delta length mismatch");

  const double g = cluster_gamma(rho, n);
  const double c = (1.0 - g) / n;
  const Vector dinv = block.d.cwiseInverse();

  // (A D A)^-1 = A^-1 D^-1 A^-1 with A^-1 = g I + c 1 1^T.
  Matrix prec = (g * g) * Matrix(dinv.asDiagonal());
  prec += (g * c) * (dinv * Vector::Ones(n).transpose() + Vector::Ones(n) * dinv.transpose());
  prec.array() += c * c * dinv.sum();
  // + Sigma^-1
  prec += ((-prior.b / (prior.a + prior.b * n)) / (prior.sigma2 * prior.a)) * Matrix::Ones(n, n);
  prec.diagonal().array() += 1.0 / (prior.sigma2 * prior.a);

  // Data term A^-1 D^-1 y: completing the square in N(y; A^-1 theta, D) puts
  // A^-1 outermost (equivalently (A D A)^-1 A y).
  const Vector rhs = apply_A_inv(dinv.cwiseProduct(block.y).eval(), rho) +
                     prior.solve(block.x * delta_c);

  SymmetricFactor factor(prec);
  ConditionalMoments cm;
  cm.mean_theta = factor.solve(rhs);
  cm.cov_theta = factor.solve(Matrix::Identity(n, n).eval());
  cm.cov_theta = 0.5 * (cm.cov_theta + cm.cov_theta.transpose()).eval();
  cm.mean_fhsc = apply_A_inv(cm.mean_theta, rho);
  // A^-1 V A^-1 = A^-1 (A^-1 V)^T since both factors are symmetric.
  Matrix half(n, n);
  for (int j = 0; j < n; ++j) half.col(j) = apply_A_inv(cm.cov_theta.col(j), rho);
  const Matrix halft = half.transpose();
  cm.cov_fhsc.resize(n, n);
  for (int j = 0; j < n; ++j) cm.cov_fhsc.col(j) = apply_A_inv(halft.col(j), rho);
  cm.cov_fhsc = 0.5 * (cm.cov_fhsc + cm.cov_fhsc.transpose()).eval();
  return cm;
}

Vector fhsc_mean_decomposition(const ConditionalMoments& cm, double rho) {
  const int n = static_cast<int>(cm.mean_theta.size());
  const double g = cluster_gamma(rho, n);
  return (g * cm.mean_theta.array() + (1.0 - g) * cm.mean_theta.mean()).matrix();
}

Matrix fhsc_variance_display(const ConditionalMoments& cm, double rho) {
  const int n = static_cast<int>(cm.mean_theta.size());
  const double g = cluster_gamma(rho, n);
  Matrix out = g * cm.cov_theta;
  out.diagonal().array() += (1.0 - g) * (1.0 + g) * cm.cov_theta.diagonal().mean();
  return out;
}

}  // namespace fhsc
