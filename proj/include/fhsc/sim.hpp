#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "fhsc/estimators.hpp"
#include "fhsc/sampler.hpp"

namespace fhsc {

// Study generating y_i = theta_i + e_i, theta_i = beta0 + beta1 x_i + u_i with
// x ~ U(0,1) drawn once per scenario, D equally spaced on [d_min, d_max],
// u ~ N(0, sigma2). beta1 follows the printed rule
// sqrt(12 (Dbar + sigma2) / (1 - cor^2)); the calibrated alternative multiplies
// the numerator by cor^2.
struct FhScenario {
  int m = 100;
  int t_rep = 100;
  double beta0 = 1.0;
  double sigma2 = 0.25;
  double d_min = 0.1;
  double d_max = 1.0;
  double target_cor = 0.2;
  bool printed_beta1_rule = true;
  std::uint64_t seed = 20240901;

  double beta1() const;
  void validate() const;
};

// Study generating theta_c ~ N(X_c delta, sigma2_u I), y ~ N(A_rho^-1 theta, D)
// over a synthetic three-cluster partition; x is an illiteracy-like covariate
// on [0, x_max] drawn once per scenario, benchmark weights ~ U(1,3) normalized.
struct FhscScenario {
  int m = 99;
  int t_rep = 100;
  int clusters = 3;
  double beta0 = 0.5;
  double beta1 = -0.01;
  double sigma2_u = 7.0;
  double d_min = 0.1;
  double d_max = 1.0;
  double x_max = 100.0;
  std::vector<double> rho_grid{0.01, 0.1, 0.2};
  double benchmark_target = 0.418;
  std::uint64_t seed = 20240902;

  void validate() const;
};

struct SimDataset {
  FitData data;
  Vector theta_true;
  BenchmarkConstraint constraint;
};

// Replicate draws share x/D/weights within a scenario; the per-replicate
// stream depends only on (scenario seed, rep), so datasets are common across
// rho cells and independent of scheduling.
SimDataset generate_fh_dataset(const FhScenario& scenario, int rep);
SimDataset generate_fhsc_dataset(const FhscScenario& scenario, double rho_true, int rep);

struct SimCell {
  std::string study;
  std::string estimator;
  int m = 0;
  double cor = std::numeric_limits<double>::quiet_NaN();
  double rho = std::numeric_limits<double>::quiet_NaN();
  int replicates = 0;
  int failed = 0;
  double mse_avg = 0.0;
  double cpmse_avg = 0.0;
  double abs_diff_avg = 0.0;
  double aad = 0.0;
  double asd = 0.0;
  Vector per_area_diff;  // cpmse_hat_i - mse_hat_i
};

struct SimReport {
  std::vector<SimCell> cells;
};

// Worker count: min(requested or hardware, SAE_THREADS when set).
int resolve_threads(int requested);

SimReport run_fh_study(const FhScenario& scenario, const McmcConfig& mcmc, int threads = 0);
SimReport run_fhsc_study(const FhscScenario& scenario, const McmcConfig& mcmc, int threads = 0);

}  // namespace fhsc
