#pragma once

#include <string>

#include "fhsc/cluster.hpp"
#include "fhsc/linalg.hpp"

namespace fhsc {

enum class BetaSharing { Common, PerCluster };
enum class VarianceSharing { Common, PerCluster };
enum class ZStructure { Identity, CommonEffect, ClusterPlusArea };
enum class RhoMode { FixedOne, Free };

// One row of the model family table. The six names map exactly onto:
//   fh      = (common beta, common sigma2,      identity,          rho fixed at 1)
//   fh-c1   = (common beta, per-cluster sigma2, common effect,     rho fixed at 1)
//   fh-c2   = (per-cluster beta & sigma2,       cluster plus area, rho fixed at 1)
//   fh-sc1/2/3 mirror the three rows with rho free in (0,1].
struct ModelVariant {
  std::string name;
  BetaSharing beta_sharing = BetaSharing::Common;
  VarianceSharing variance_sharing = VarianceSharing::Common;
  ZStructure z_structure = ZStructure::Identity;
  RhoMode rho_mode = RhoMode::FixedOne;
  double gamma_hat = 0.0;          // required by fh-c2 / fh-sc3
  double ridge_scale = 1e-8;       // common-effect prior ridge, times sigma2_c

  static ModelVariant from_name(const std::string& name);
  void validate() const;
  bool rho_free() const { return rho_mode == RhoMode::Free; }
};

// Per-cluster data slice: direct estimates, smoothed variances, fixed-effect design.
struct ClusterBlock {
  Vector y;
  Vector d;
  Matrix x;

  int size() const { return static_cast<int>(y.size()); }
  void validate() const;
};

// gamma_c = rho / ((1 - rho) n_c + rho), the scalar face of A_{rho,c}^-1.
double cluster_gamma(double rho, int n_c);

// A_{rho,c} v = v + ((1-rho)/rho) L_c v, with L_c v = n_c v - sum(v) 1. O(n_c).
Vector apply_A(const Vector& v, double rho);

// A_{rho,c}^-1 v = gamma_c v + (1 - gamma_c) mean(v) 1 (Sherman-Morrison form). O(n_c).
Vector apply_A_inv(const Vector& v, double rho);

// Blockwise versions over a full m-vector.
Vector apply_A_blocks(const Vector& v, double rho, const Clustering& clustering);
Vector apply_A_inv_blocks(const Vector& v, double rho, const Clustering& clustering);

double log_det_A(double rho, int n_c);

// Effective prior covariance of theta_c - X_c delta_c. All Table-1 rows reduce
// to sigma2 * (a I + b 1 1^T):
//   identity           a = 1,           b = 0
//   common effect      a = ridge_scale, b = 1         (rank-1 prior plus ridge)
//   cluster plus area  a = 1,           b = gamma_hat
struct PriorCov {
  double sigma2 = 1.0;
  double a = 1.0;
  double b = 0.0;
  int n = 0;

  static PriorCov make(const ModelVariant& variant, double sigma2, int n_c);

  Matrix dense() const;
  Vector solve(const Vector& v) const;  // Sherman-Morrison, O(n)
  double quad(const Vector& v) const;   // v^T Sigma^-1 v
  double log_det() const;
  bool diagonal() const { return b == 0.0; }
};

struct ConditionalMoments {
  Vector mean_theta;   // E(theta_c | .)
  Matrix cov_theta;    // V(theta_c | .)
  Vector mean_fhsc;    // A^-1 E(theta_c | .)
  Matrix cov_fhsc;     // A^-1 V A^-1 (exact sandwich)
};

// Closed-form conditional moments:
//   V = ((A D A)^-1 + Sigma^-1)^-1,  E = V (D^-1 A^-1 y + Sigma^-1 X delta).
ConditionalMoments conditional_moments(const ClusterBlock& block, const Vector& delta_c,
                                       const PriorCov& prior, double rho);

// gamma_c E(theta_c|.) + (1 - gamma_c) avg_j E(theta_jc|.) 1 - equals mean_fhsc exactly.
Vector fhsc_mean_decomposition(const ConditionalMoments& cm, double rho);

// The scalar variance display (gamma V + (1-gamma)(1+gamma) avg_j V_jj I),
// reported as a diagnostic next to the exact sandwich; they differ termwise.
Matrix fhsc_variance_display(const ConditionalMoments& cm, double rho);

}  // namespace fhsc
