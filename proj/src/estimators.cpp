#include "fhsc/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fhsc/error.hpp"

namespace fhsc {

BenchmarkConstraint BenchmarkConstraint::scalar(const Vector& weights, double target) {
  BenchmarkConstraint c;
  c.w = weights.transpose();
  c.p = Vector::Constant(1, target);
  return c;
}

void BenchmarkConstraint::validate(int m) const {
  if (w.cols() != m) throw_validation("constraint width does not match area count");
  if (w.rows() < 1 || w.rows() > m) throw_validation("need 1 <= k <= m constraints");
  if (p.size() != w.rows()) throw_validation("constraint target length mismatch");
  Eigen::ColPivHouseholderQR<Matrix> qr(w.transpose());
  if (qr.rank() < w.rows()) throw_validation("constraint matrix W is rank deficient");
}

Vector ergodic_mean(const DrawStore& draws) {
  draws.validate();
  return draws.theta_fhsc.rowwise().mean();
}

Vector rb_estimate(const DrawStore& draws) {
  draws.validate();
  if (draws.cond_mean.size() == 0) throw_validation("draw store has no conditional means");
  return draws.cond_mean.rowwise().mean();
}

Vector project_draw(const Vector& theta_fhsc, double rho, const Clustering& clustering,
                    const BenchmarkConstraint& constraint) {
  const int m = static_cast<int>(theta_fhsc.size());
  constraint.validate(m);
  const int k = constraint.rows();

  Matrix u(m, k);  // A^-1 W^T, column per constraint
  for (int r = 0; r < k; ++r)
    u.col(r) = apply_A_inv_blocks(constraint.w.row(r).transpose(), rho, clustering);
  Matrix g = constraint.w * u;  // W A^-1 W^T, symmetric positive definite at full rank
  g = 0.5 * (g + g.transpose()).eval();
  Eigen::LLT<Matrix> llt(g);
  if (llt.info() != Eigen::Success)
    throw_numeric("W A^-1 W^T is singular; constraint rows are not independent");
  const Vector gap = constraint.p - constraint.w * theta_fhsc;
  return theta_fhsc + u * llt.solve(gap);
}

Vector rb_benchmarked(const DrawStore& draws, const BenchmarkConstraint& constraint) {
  draws.validate();
  if (draws.cond_mean.size() == 0) throw_validation("draw store has no conditional means");
  const int total = draws.total_draws();
  Vector acc = Vector::Zero(draws.num_areas);
  for (int t = 0; t < total; ++t)
    acc += project_draw(draws.cond_mean.col(t), draws.rho[t], draws.clustering, constraint);
  return acc / total;
}

Vector benchmark_point(const Vector& estimate, double rho_hat, const Clustering& clustering,
                       const BenchmarkConstraint& constraint) {
  if (!(rho_hat > 0.0) || rho_hat > 1.0) throw_validation("rho_hat must lie in (0, 1]");
  return project_draw(estimate, rho_hat, clustering, constraint);
}

std::vector<Vector> scalar_benchmark_coefficients(const Vector& weights, double rho,
                                                  const Clustering& clustering) {
  const int nclusters = clustering.num_clusters();
  double denom = 0.0;  // w^T A^-1 w accumulated over clusters
  std::vector<Vector> numer(nclusters);
  for (int c = 0; c < nclusters; ++c) {
    const auto& members = clustering.members[c];
    const int n = static_cast<int>(members.size());
    Vector wc(n);
    for (int j = 0; j < n; ++j) wc[j] = weights[members[j]];
    const double g = cluster_gamma(rho, n);
    const double wbar = wc.mean();
    numer[c] = (g * wc.array() + (1.0 - g) * wbar).matrix();
    denom += g * wc.squaredNorm() + (1.0 - g) * n * wbar * wbar;
  }
  if (denom == 0.0) throw_validation("scalar benchmark weights are all zero");
  for (auto& v : numer) v /= denom;
  return numer;
}

Vector cpmse(const DrawStore& draws, const Vector& theta_hat) {
  draws.validate();
  if (draws.cond_mean.size() == 0 || draws.cond_var.size() == 0)
    throw_validation("draw store is missing stored conditional moments");
  const int total = draws.total_draws();
  Vector out = draws.cond_var.rowwise().mean();
  for (int t = 0; t < total; ++t)
    out += (draws.cond_mean.col(t) - theta_hat).array().square().matrix() / total;
  return out;
}

Vector cpmse_benchmarked(const Vector& cpmse_plain, const Vector& rb, const Vector& rb_b) {
  return cpmse_plain + (rb_b - rb).array().square().matrix();
}

Vector pmse(const DrawStore& draws, const Vector& ergodic, const Vector& ergodic_b) {
  const int total = draws.total_draws();
  Vector var = Vector::Zero(draws.num_areas);
  for (int t = 0; t < total; ++t)
    var += (draws.theta_fhsc.col(t) - ergodic).array().square().matrix();
  var /= total;
  return var + (ergodic_b - ergodic).array().square().matrix();
}

Vector coefficient_of_variation(const Vector& estimate, const Vector& cpmse_values) {
  Vector out(estimate.size());
  for (int i = 0; i < estimate.size(); ++i)
    out[i] = estimate[i] == 0.0 ? std::numeric_limits<double>::quiet_NaN()
                                : std::sqrt(cpmse_values[i]) / estimate[i];
  return out;
}

Vector standardized_residuals(const Vector& y, const Vector& d, const Vector& estimate) {
  if ((d.array() <= 0.0).any()) throw_validation("standardized residuals need D > 0");
  return (y - estimate).cwiseQuotient(d.cwiseSqrt());
}

Matrix draw_quantiles(const DrawStore& draws, const BenchmarkConstraint* constraint,
                      const std::vector<double>& probs) {
  const int total = draws.total_draws();
  const int m = draws.num_areas;
  Matrix samples(m, total);
  for (int t = 0; t < total; ++t) {
    samples.col(t) = constraint ? project_draw(draws.theta_fhsc.col(t), draws.rho[t],
                                               draws.clustering, *constraint)
                                : draws.theta_fhsc.col(t);
  }
  Matrix out(m, static_cast<int>(probs.size()));
  std::vector<double> row(total);
  for (int i = 0; i < m; ++i) {
    for (int t = 0; t < total; ++t) row[t] = samples(i, t);
    std::sort(row.begin(), row.end());
    for (size_t q = 0; q < probs.size(); ++q) {
      // linear interpolation on the order statistics
      const double h = probs[q] * (total - 1);
      const int lo = static_cast<int>(std::floor(h));
      const int hi = std::min(lo + 1, total - 1);
      out(i, static_cast<int>(q)) = row[lo] + (h - lo) * (row[hi] - row[lo]);
    }
  }
  return out;
}

EstimateTable build_estimate_table(const DrawStore& draws, const Vector& y, const Vector& d,
                                   const BenchmarkConstraint* constraint) {
  EstimateTable t;
  t.ergodic = ergodic_mean(draws);
  t.rb = rb_estimate(draws);
  t.cpmse_rb = cpmse(draws, t.rb);
  t.cv = coefficient_of_variation(t.rb, t.cpmse_rb);
  t.residuals = standardized_residuals(y, d, t.rb);
  if (constraint) {
    t.rb_b = rb_benchmarked(draws, *constraint);
    const double rho_hat = draws.rho.mean();
    t.ergodic_b = benchmark_point(t.ergodic, rho_hat, draws.clustering, *constraint);
    t.cpmse_rb_b = cpmse_benchmarked(t.cpmse_rb, t.rb, t.rb_b);
    t.pmse_b = pmse(draws, t.ergodic, t.ergodic_b);
    t.cv_b = coefficient_of_variation(t.rb_b, t.cpmse_rb_b);
    t.benchmark_slack = (constraint->w * t.rb_b - constraint->p).cwiseAbs().maxCoeff();
  }
  return t;
}

}  // namespace fhsc
