#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fhsc/cluster.hpp"
#include "fhsc/model.hpp"
#include "fhsc/rng.hpp"

namespace fhsc {

struct Priors {
  double rho_a = 1.1;   // Beta(a, b) on rho
  double rho_b = 1.1;
  double prec_a = 1.0;  // Gamma(a, b) on each precision 1/sigma2
  double prec_b = 1.0;

  void validate() const;
};

struct McmcConfig {
  long total_iters = 50000;  // L
  long burn_in = 10000;      // T
  int thin = 4;
  int chains = 2;
  std::uint64_t seed = 0;
  double tuning_init = 0.5;  // kappa, sd of the log-rho random walk
  int adapt_window = 100;
  double adapt_low = 0.40;
  double adapt_high = 0.60;
  double adapt_factor = 1.1;

  void validate() const;
  int draws_per_chain() const { return static_cast<int>((total_iters - burn_in) / thin); }
};

// Model-ready inputs in canonical area order.
struct FitData {
  Vector y;
  Vector d;
  Matrix x;
  Clustering clustering;

  int num_areas() const { return static_cast<int>(y.size()); }
  void validate() const;
};

struct ChainState {
  Vector theta;       // m
  Vector theta_fhsc;  // m, equals A_rho^-1 theta after every update cycle
  Vector delta;       // p (common) or C*p stacked by cluster
  Vector sigma2;      // 1 (common) or C entries
  double rho = 1.0;
  double kappa = 0.5;
  long window_accepts = 0;   // current adaptation window
  long window_proposals = 0;
  long accepts = 0;          // since last reset (run_chains resets at burn-in end)
  long proposals = 0;
  Rng rng;

  ChainState() : rng(0) {}
};

// Thinned post-burn-in draws pooled over chains; column t of each matrix is one
// stored draw (chain-major: chain * per_chain + d). cond_mean / cond_var hold
// E(theta_fhsc | .) and diag V(theta_fhsc | .) at the parameter values used for
// that draw, which the Rao-Blackwell and CPMSE estimators consume.
struct DrawStore {
  int num_areas = 0;
  int chains = 0;
  int per_chain = 0;
  Matrix theta_fhsc;
  Matrix theta;
  Matrix cond_mean;
  Matrix cond_var;
  Vector rho;
  Matrix sigma2;
  Matrix delta;
  std::vector<double> accept_rate;  // per chain, post burn-in rho acceptance
  std::vector<double> kappa_final;
  Clustering clustering;
  std::string variant_name;
  std::string rng_algorithm;

  int total_draws() const { return chains * per_chain; }
  void validate() const;
};

// Internals exposed for direct testing of the Gibbs / MH conditionals.
namespace sampler_detail {

struct BlockCache {
  std::vector<ClusterBlock> blocks;  // per cluster
};
BlockCache make_blocks(const FitData& data);

// Log of N(theta_fhsc; A^-1 X delta, A^-1 Sigma A^-1) * Beta(rho; a, b), the
// quantity whose ratio drives the Metropolis step (theta_fhsc stays fixed
// across the proposal; the raw theta follows the accepted metric).
double log_rho_target(double rho, const Vector& theta_fhsc, const Vector& delta,
                      const Vector& sigma2, const FitData& data, const BlockCache& cache,
                      const ModelVariant& variant, const Priors& priors);

ChainState init_state(const FitData& data, const BlockCache& cache, const ModelVariant& variant,
                      const McmcConfig& config, int chain_index);

void mh_rho_step(ChainState& state, const FitData& data, const BlockCache& cache,
                 const ModelVariant& variant, const Priors& priors);

struct ThetaRecord {
  Vector cond_mean_fhsc;  // m
  Vector cond_var_fhsc;   // m, diagonal of A^-1 V A^-1
};
ThetaRecord gibbs_theta_step(ChainState& state, const FitData& data, const BlockCache& cache,
                             const ModelVariant& variant);

void gibbs_beta_step(ChainState& state, const FitData& data, const BlockCache& cache,
                     const ModelVariant& variant);

void gibbs_variance_step(ChainState& state, const FitData& data, const BlockCache& cache,
                         const ModelVariant& variant, const Priors& priors);

void adapt_tuning(ChainState& state, const McmcConfig& config);

// Conditional mean/variance of beta (common case) without drawing; oracle hook.
void beta_conditional(const ChainState& state, const FitData& data, const BlockCache& cache,
                      const ModelVariant& variant, Vector* mean, Matrix* cov);

double sigma2_of(const ChainState& state, const ModelVariant& variant, int cluster);
Vector delta_of(const ChainState& state, const ModelVariant& variant, int cluster, int p);

}  // namespace sampler_detail

DrawStore run_chains(const FitData& data, const ModelVariant& variant, const Priors& priors,
                     const McmcConfig& config);

}  // namespace fhsc
