#pragma once

#include <vector>

#include "fhsc/sampler.hpp"

namespace fhsc {

// Linear equality constraints W theta = p, with W of full row rank k <= m.
struct BenchmarkConstraint {
  Matrix w;  // k x m
  Vector p;  // k

  static BenchmarkConstraint scalar(const Vector& weights, double target);
  int rows() const { return static_cast<int>(w.rows()); }
  void validate(int m) const;
};

// Per-area average of the stored theta_fhsc draws.
Vector ergodic_mean(const DrawStore& draws);

// Rao-Blackwell estimator: average of the stored conditional means.
Vector rb_estimate(const DrawStore& draws);

// Projection of one draw onto {W theta = p} in the A_rho metric:
//   theta + A^-1 W^T (W A^-1 W^T)^-1 (p - W theta), using the closed-form A^-1.
Vector project_draw(const Vector& theta_fhsc, double rho, const Clustering& clustering,
                    const BenchmarkConstraint& constraint);

// Rao-Blackwell benchmarked estimator: average over draws of the projected
// conditional means, each with its own rho.
Vector rb_benchmarked(const DrawStore& draws, const BenchmarkConstraint& constraint);

// Plug-in projection of a point estimate at rho_hat.
Vector benchmark_point(const Vector& estimate, double rho_hat, const Clustering& clustering,
                       const BenchmarkConstraint& constraint);

// Scalar-constraint fast path: per-cluster correction vectors a_c such that
// theta^B_c = theta_c + a_c (p - w^T theta). The denominator is w^T A^-1 w over
// all clusters so the result equals the general k = 1 projection.
std::vector<Vector> scalar_benchmark_coefficients(const Vector& weights, double rho,
                                                  const Clustering& clustering);

// CPMSE(theta_hat)_j = avg_l V_j(l) + avg_l (E_j(l) - theta_hat_j)^2.
Vector cpmse(const DrawStore& draws, const Vector& theta_hat);

// CPMSE(theta_hat_b) = (theta_hat_b - theta_hat)^2 + CPMSE(theta_hat).
Vector cpmse_benchmarked(const Vector& cpmse_plain, const Vector& rb, const Vector& rb_b);

// PMSE of the benchmarked ergodic estimator: squared gap plus the marginal
// posterior variance of theta_fhsc from the draws.
Vector pmse(const DrawStore& draws, const Vector& ergodic, const Vector& ergodic_b);

// sqrt(CPMSE)/estimate; NaN where the estimate is zero.
Vector coefficient_of_variation(const Vector& estimate, const Vector& cpmse_values);

// (y - estimate)/sqrt(D)
Vector standardized_residuals(const Vector& y, const Vector& d, const Vector& estimate);

// Empirical quantiles of the (projected, if a constraint is given) draws; one
// row per area, one column per probability.
Matrix draw_quantiles(const DrawStore& draws, const BenchmarkConstraint* constraint,
                      const std::vector<double>& probs);

// Everything the fit command reports, one entry per area.
struct EstimateTable {
  Vector ergodic;
  Vector rb;
  Vector rb_b;              // empty without a constraint
  Vector ergodic_b;         // empty without a constraint
  Vector cpmse_rb;
  Vector cpmse_rb_b;        // empty without a constraint
  Vector pmse_b;            // empty without a constraint
  Vector cv;
  Vector cv_b;              // empty without a constraint
  Vector residuals;
  double benchmark_slack = 0.0;  // max |W rb_b - p| (rho varies across draws)
};

EstimateTable build_estimate_table(const DrawStore& draws, const Vector& y, const Vector& d,
                                   const BenchmarkConstraint* constraint);

}  // namespace fhsc
