#include "fhsc/sampler.hpp"

#include <cmath>

#include "fhsc/error.hpp"

namespace fhsc {

void Priors::validate() const {
  if (!(rho_a > 0.0) || !(rho_b > 0.0)) throw_validation("Beta prior on rho must have a, b > 0");
  if (!(prec_a > 0.0) || !(prec_b > 0.0))
    throw_validation("Gamma prior on precisions must have a, b > 0 (proper priors required)");
}

void McmcConfig::validate() const {
  if (burn_in >= total_iters) throw_validation("burn_in must be smaller than total_iters");
  if (thin < 1) throw_validation("thin must be >= 1");
  if (chains < 1) throw_validation("need at least one chain");
  if ((total_iters - burn_in) % thin != 0)
    throw_validation("thin must divide total_iters - burn_in");
  if (!(tuning_init > 0.0)) throw_validation("tuning_init must be positive");
  if (adapt_window < 1) throw_validation("adapt_window must be >= 1");
  if (!(adapt_low > 0.0 && adapt_low < adapt_high && adapt_high < 1.0))
    throw_validation("need 0 < adapt_low < adapt_high < 1");
  if (!(adapt_factor > 1.0)) throw_validation("adapt_factor must exceed 1");
}

void FitData::validate() const {
  const int m = num_areas();
  if (m == 0) throw_validation("no areas");
  if (d.size() != m || x.rows() != m) throw_validation("fit data dimension mismatch");
  if ((d.array() <= 0.0).any()) throw_validation("smoothed variances must be positive");
  clustering.validate();
  if (clustering.num_areas() != m) throw_validation("clustering does not match area count");
}

void DrawStore::validate() const {
  if (total_draws() == 0) throw_validation("empty draw store");
  if (theta_fhsc.cols() != total_draws() || cond_mean.cols() != total_draws() ||
      cond_var.cols() != total_draws())
    throw_validation("draw store columns inconsistent");
}

namespace sampler_detail {

BlockCache make_blocks(const FitData& data) {
  BlockCache cache;
  const int c = data.clustering.num_clusters();
  cache.blocks.resize(c);
  for (int k = 0; k < c; ++k) {
    const auto& members = data.clustering.members[k];
    const int n = static_cast<int>(members.size());
    ClusterBlock& b = cache.blocks[k];
    b.y.resize(n);
    b.d.resize(n);
    b.x.resize(n, data.x.cols());
    for (int j = 0; j < n; ++j) {
      b.y[j] = data.y[members[j]];
      b.d[j] = data.d[members[j]];
      b.x.row(j) = data.x.row(members[j]);
    }
    b.validate();
  }
  return cache;
}

double sigma2_of(const ChainState& state, const ModelVariant& variant, int cluster) {
  return variant.variance_sharing == VarianceSharing::Common ? state.sigma2[0]
                                                             : state.sigma2[cluster];
}

Vector delta_of(const ChainState& state, const ModelVariant& variant, int cluster, int p) {
  if (variant.beta_sharing == BetaSharing::Common) return state.delta;
  return state.delta.segment(cluster * p, p);
}

namespace {

double log_beta_density(double rho, double a, double b) {
  return (a - 1.0) * std::log(rho) + (b - 1.0) * std::log1p(-rho) + std::lgamma(a + b) -
         std::lgamma(a) - std::lgamma(b);
}

constexpr double kLog2Pi = 1.8378770664093454836;

// Gathers/scatters between full m-vectors and cluster order.
Vector gather(const Vector& v, const std::vector<int>& members) {
  Vector out(members.size());
  for (size_t j = 0; j < members.size(); ++j) out[static_cast<int>(j)] = v[members[j]];
  return out;
}

void scatter(const Vector& sub, const std::vector<int>& members, Vector& out) {
  for (size_t j = 0; j < members.size(); ++j) out[members[j]] = sub[static_cast<int>(j)];
}

}  // namespace

double log_rho_target(double rho, const Vector& theta_fhsc, const Vector& delta,
                      const Vector& sigma2, const FitData& data, const BlockCache& cache,
                      const ModelVariant& variant, const Priors& priors) {
  // N(theta_fhsc; A^-1 X delta, A^-1 Sigma A^-1) * Beta(rho; a, b), blockwise.
  // The smoothed vector is the one whose law depends on rho, so it is the one
  // held fixed across the proposal (the beta and variance steps are likewise
  // written in theta_fhsc).
  double lp = log_beta_density(rho, priors.rho_a, priors.rho_b);
  const int p = static_cast<int>(data.x.cols());
  for (int c = 0; c < data.clustering.num_clusters(); ++c) {
    const ClusterBlock& b = cache.blocks[c];
    const int n = b.size();
    const double s2 = variant.variance_sharing == VarianceSharing::Common ? sigma2[0] : sigma2[c];
    const PriorCov prior = PriorCov::make(variant, s2, n);
    const Vector dc = variant.beta_sharing == BetaSharing::Common ? delta : delta.segment(c * p, p);
    const Vector phi_c = gather(theta_fhsc, data.clustering.members[c]);
    const Vector r = phi_c - apply_A_inv(b.x * dc, rho);
    // (A^-1 Sigma A^-1)^-1 = A Sigma^-1 A; A and Sigma share the aI + b11^T form.
    const double quad = prior.quad(apply_A(r, rho));
    const double logdet = prior.log_det() - 2.0 * log_det_A(rho, n);
    lp += -0.5 * (n * kLog2Pi + logdet + quad);
  }
  return lp;
}

ChainState init_state(const FitData& data, const BlockCache& cache, const ModelVariant& variant,
                      const McmcConfig& config, int chain_index) {
  ChainState state;
  state.rng = Rng(config.seed, stream_id(0xC4A1ULL, static_cast<std::uint64_t>(chain_index)));
  state.kappa = config.tuning_init;
  state.rho = variant.rho_free() ? 0.5 : 1.0;

  const int m = data.num_areas();
  const int p = static_cast<int>(data.x.cols());
  const int nclusters = data.clustering.num_clusters();

  const double var_y = std::max((data.y.array() - data.y.mean()).square().mean(), 1e-6);

  // delta from GLS at sigma2 = var(y)
  auto gls = [&](const std::vector<int>& cluster_ids) {
    Matrix prec = Matrix::Zero(p, p);
    Vector rhs = Vector::Zero(p);
    for (int c : cluster_ids) {
      const ClusterBlock& b = cache.blocks[c];
      const PriorCov prior = PriorCov::make(variant, var_y, b.size());
      Matrix sx(b.size(), p);
      for (int j = 0; j < p; ++j) sx.col(j) = prior.solve(b.x.col(j).eval());
      prec += b.x.transpose() * sx;
      rhs += sx.transpose() * b.y;
    }
    SymmetricFactor f(prec);
    return f.solve(rhs).eval();
  };

  if (variant.beta_sharing == BetaSharing::Common) {
    std::vector<int> all(nclusters);
    for (int c = 0; c < nclusters; ++c) all[c] = c;
    state.delta = gls(all);
  } else {
    state.delta.resize(nclusters * p);
    for (int c = 0; c < nclusters; ++c) state.delta.segment(c * p, p) = gls({c});
  }

  // sigma2 from method-of-moments residuals, floored at 1e-6
  auto mom_sigma2 = [&](const std::vector<int>& cluster_ids) {
    double ss = 0.0, dsum = 0.0;
    int count = 0;
    for (int c : cluster_ids) {
      const ClusterBlock& b = cache.blocks[c];
      const Vector dc = delta_of(state, variant, c, p);
      const Vector r = b.y - b.x * dc;
      ss += r.squaredNorm();
      dsum += b.d.sum();
      count += b.size();
    }
    return std::max(ss / count - dsum / count, 1e-6);
  };

  if (variant.variance_sharing == VarianceSharing::Common) {
    std::vector<int> all(nclusters);
    for (int c = 0; c < nclusters; ++c) all[c] = c;
    state.sigma2 = Vector::Constant(1, mom_sigma2(all));
  } else {
    state.sigma2.resize(nclusters);
    for (int c = 0; c < nclusters; ++c) state.sigma2[c] = mom_sigma2({c});
  }

  state.theta = data.y;
  state.theta_fhsc = apply_A_inv_blocks(state.theta, state.rho, data.clustering);
  (void)m;
  return state;
}

void mh_rho_step(ChainState& state, const FitData& data, const BlockCache& cache,
                 const ModelVariant& variant, const Priors& priors) {
  if (!variant.rho_free()) return;
  state.window_proposals += 1;
  state.proposals += 1;

  const double rho_star = std::exp(std::log(state.rho) + state.kappa * state.rng.normal());
  const double u = state.rng.uniform();
  if (rho_star <= 0.0 || rho_star >= 1.0) return;  // outright reject

  const double lp_cur = log_rho_target(state.rho, state.theta_fhsc, state.delta, state.sigma2,
                                       data, cache, variant, priors);
  const double lp_star = log_rho_target(rho_star, state.theta_fhsc, state.delta, state.sigma2,
                                        data, cache, variant, priors);
  if (!std::isfinite(lp_star) || !std::isfinite(lp_cur)) {
    log_warning("non-finite density in rho step; proposal rejected");
    return;
  }
  // rho*/rho is the Jacobian of the log-scale walk.
  const double log_alpha = lp_star - lp_cur + std::log(rho_star) - std::log(state.rho);
  if (std::log(u) < log_alpha) {
    state.rho = rho_star;
    // theta_fhsc is the fixed coordinate; the raw vector follows the new metric.
    state.theta = apply_A_blocks(state.theta_fhsc, state.rho, data.clustering);
    state.window_accepts += 1;
    state.accepts += 1;
  }
}

ThetaRecord gibbs_theta_step(ChainState& state, const FitData& data, const BlockCache& cache,
                             const ModelVariant& variant) {
  const int m = data.num_areas();
  const int p = static_cast<int>(data.x.cols());
  ThetaRecord rec;
  rec.cond_mean_fhsc.resize(m);
  rec.cond_var_fhsc.resize(m);

  for (int c = 0; c < data.clustering.num_clusters(); ++c) {
    const ClusterBlock& b = cache.blocks[c];
    const int n = b.size();
    const auto& members = data.clustering.members[c];
    const double s2 = sigma2_of(state, variant, c);
    const PriorCov prior = PriorCov::make(variant, s2, n);
    const Vector dc = delta_of(state, variant, c, p);
    const Vector xd = b.x * dc;

    if (state.rho == 1.0 && prior.diagonal()) {
      // Classical FH conditional: everything diagonal.
      for (int j = 0; j < n; ++j) {
        const double prec = 1.0 / b.d[j] + 1.0 / prior.sigma2;
        const double var = 1.0 / prec;
        const double mean = var * (b.y[j] / b.d[j] + xd[j] / prior.sigma2);
        const double draw = mean + std::sqrt(var) * state.rng.normal();
        state.theta[members[j]] = draw;
        state.theta_fhsc[members[j]] = draw;
        rec.cond_mean_fhsc[members[j]] = mean;
        rec.cond_var_fhsc[members[j]] = var;
      }
      continue;
    }

    const double g = cluster_gamma(state.rho, n);
    const double cc = (1.0 - g) / n;
    const Vector dinv = b.d.cwiseInverse();

    Matrix prec = (g * g) * Matrix(dinv.asDiagonal());
    prec += (g * cc) * (dinv * Vector::Ones(n).transpose() + Vector::Ones(n) * dinv.transpose());
    prec.array() += cc * cc * dinv.sum();
    prec += ((-prior.b / (prior.a + prior.b * n)) / (prior.sigma2 * prior.a)) * Matrix::Ones(n, n);
    prec.diagonal().array() += 1.0 / (prior.sigma2 * prior.a);

    const Vector rhs =
        apply_A_inv(dinv.cwiseProduct(b.y).eval(), state.rho) + prior.solve(xd);
    SymmetricFactor factor(prec);
    const Vector mean = factor.solve(rhs);
    const Vector draw = factor.sample_from_precision(mean, state.rng);

    const Vector vdiag = factor.inverse_diagonal();
    const Vector v1 = factor.solve_ones();
    const double v11 = v1.sum();
    const Vector sandwich =
        (g * g) * vdiag + (2.0 * g * cc) * v1 + Vector::Constant(n, cc * cc * v11);

    const Vector draw_fhsc = apply_A_inv(draw, state.rho);
    const Vector mean_fhsc = apply_A_inv(mean, state.rho);
    scatter(draw, members, state.theta);
    scatter(draw_fhsc, members, state.theta_fhsc);
    scatter(mean_fhsc, members, rec.cond_mean_fhsc);
    scatter(sandwich, members, rec.cond_var_fhsc);
  }
  return rec;
}

void beta_conditional(const ChainState& state, const FitData& data, const BlockCache& cache,
                      const ModelVariant& variant, Vector* mean, Matrix* cov) {
  const int p = static_cast<int>(cache.blocks[0].x.cols());
  Matrix prec = Matrix::Zero(p, p);
  Vector rhs = Vector::Zero(p);
  for (size_t c = 0; c < cache.blocks.size(); ++c) {
    const ClusterBlock& b = cache.blocks[c];
    const PriorCov prior =
        PriorCov::make(variant, sigma2_of(state, variant, static_cast<int>(c)), b.size());
    Matrix sx(b.size(), p);
    for (int j = 0; j < p; ++j) sx.col(j) = prior.solve(b.x.col(j).eval());
    prec += b.x.transpose() * sx;
    // X^T A Sigma^-1 theta_fhsc; A theta_fhsc = theta, and A commutes with Sigma.
    rhs += sx.transpose() * gather(state.theta, data.clustering.members[c]);
  }
  SymmetricFactor f(prec);
  if (cov) *cov = f.solve(Matrix::Identity(p, p).eval());
  if (mean) *mean = f.solve(rhs);
}

void gibbs_beta_step(ChainState& state, const FitData& data, const BlockCache& cache,
                     const ModelVariant& variant) {
  const int p = static_cast<int>(data.x.cols());
  auto draw_for = [&](const std::vector<int>& cluster_ids) {
    Matrix prec = Matrix::Zero(p, p);
    Vector rhs = Vector::Zero(p);
    for (int c : cluster_ids) {
      const ClusterBlock& b = cache.blocks[c];
      const PriorCov prior = PriorCov::make(variant, sigma2_of(state, variant, c), b.size());
      Matrix sx(b.size(), p);
      for (int j = 0; j < p; ++j) sx.col(j) = prior.solve(b.x.col(j).eval());
      prec += b.x.transpose() * sx;
      // X^T A_rho Sigma^-1 theta_fhsc with A theta_fhsc = theta (A and Sigma commute).
      const Vector theta_c = gather(state.theta, data.clustering.members[c]);
      rhs += sx.transpose() * theta_c;
    }
    SymmetricFactor f(prec);
    const Vector mean = f.solve(rhs);
    return f.sample_from_precision(mean, state.rng).eval();
  };

  if (variant.beta_sharing == BetaSharing::Common) {
    std::vector<int> all(data.clustering.num_clusters());
    for (int c = 0; c < data.clustering.num_clusters(); ++c) all[c] = c;
    state.delta = draw_for(all);
  } else {
    for (int c = 0; c < data.clustering.num_clusters(); ++c)
      state.delta.segment(c * p, p) = draw_for({c});
  }
}

void gibbs_variance_step(ChainState& state, const FitData& data, const BlockCache& cache,
                         const ModelVariant& variant, const Priors& priors) {
  const int p = static_cast<int>(data.x.cols());

  auto ssb_for = [&](int c) {
    const ClusterBlock& b = cache.blocks[c];
    const Vector dc = delta_of(state, variant, c, p);
    // A_rho theta_fhsc equals theta at every point of the cycle.
    const Vector r = gather(state.theta, data.clustering.members[c]) - b.x * dc;
    double ssb;
    if (variant.z_structure == ZStructure::ClusterPlusArea) {
      // (Z H Z^T)^-1 = (gamma_hat 1 1^T + I)^-1 via Sherman-Morrison.
      const double gh = variant.gamma_hat;
      const double s = r.sum();
      ssb = r.squaredNorm() - gh * s * s / (1.0 + gh * b.size());
    } else {
      ssb = r.squaredNorm();  // (Z Z^T)^-1 = I for the identity/common-effect rows
    }
    if (ssb < 0.0) {
      log_warning("negative SSB clamped to zero");
      ssb = 0.0;
    }
    return ssb;
  };

  const double extra = variant.z_structure == ZStructure::ClusterPlusArea ? 0.5 : 0.0;

  if (variant.variance_sharing == VarianceSharing::Common) {
    double ssb = 0.0;
    for (int c = 0; c < data.clustering.num_clusters(); ++c) ssb += ssb_for(c);
    const double shape = 0.5 * data.num_areas() + priors.prec_a;
    const double rate = 0.5 * ssb + priors.prec_b;
    state.sigma2[0] = 1.0 / state.rng.gamma(shape, rate);
  } else {
    for (int c = 0; c < data.clustering.num_clusters(); ++c) {
      const double shape = 0.5 * cache.blocks[c].size() + extra + priors.prec_a;
      const double rate = 0.5 * ssb_for(c) + priors.prec_b;
      state.sigma2[c] = 1.0 / state.rng.gamma(shape, rate);
    }
  }
}

void adapt_tuning(ChainState& state, const McmcConfig& config) {
  if (state.window_proposals > 0) {
    const double rate = static_cast<double>(state.window_accepts) / state.window_proposals;
    if (rate < config.adapt_low) state.kappa /= config.adapt_factor;
    else if (rate > config.adapt_high) state.kappa *= config.adapt_factor;
  }
  state.window_accepts = 0;
  state.window_proposals = 0;
}

}  // namespace sampler_detail

namespace {

// Rank requirements depend on beta sharing: the stacked design must always be
// full rank, and per-cluster designs only when each cluster has its own beta.
void validate_design(const FitData& data, const sampler_detail::BlockCache& cache,
                     const ModelVariant& variant) {
  Eigen::ColPivHouseholderQR<Matrix> qr(data.x);
  if (qr.rank() < data.x.cols()) throw_validation("fixed-effect design is rank deficient");
  if (variant.beta_sharing == BetaSharing::PerCluster) {
    for (size_t c = 0; c < cache.blocks.size(); ++c) {
      Eigen::ColPivHouseholderQR<Matrix> qc(cache.blocks[c].x);
      if (qc.rank() < cache.blocks[c].x.cols())
        throw_validation("fixed-effect design is rank deficient in cluster " +
                         std::to_string(c + 1));
    }
  }
}

}  // namespace

DrawStore run_chains(const FitData& data, const ModelVariant& variant, const Priors& priors,
                     const McmcConfig& config) {
  using namespace sampler_detail;
  data.validate();
  variant.validate();
  priors.validate();
  config.validate();
  const int p = static_cast<int>(data.x.cols());
  const int nclusters = data.clustering.num_clusters();
  const BlockCache cache = make_blocks(data);
  validate_design(data, cache, variant);

  DrawStore store;
  store.num_areas = data.num_areas();
  store.chains = config.chains;
  store.per_chain = config.draws_per_chain();
  const int total = store.total_draws();
  store.theta_fhsc.resize(store.num_areas, total);
  store.theta.resize(store.num_areas, total);
  store.cond_mean.resize(store.num_areas, total);
  store.cond_var.resize(store.num_areas, total);
  store.rho.resize(total);
  store.sigma2.resize(variant.variance_sharing == VarianceSharing::Common ? 1 : nclusters, total);
  store.delta.resize(variant.beta_sharing == BetaSharing::Common ? p : nclusters * p, total);
  store.accept_rate.assign(config.chains, 0.0);
  store.kappa_final.assign(config.chains, config.tuning_init);
  store.clustering = data.clustering;
  store.variant_name = variant.name;
  store.rng_algorithm = Rng::kAlgorithm;

  for (int chain = 0; chain < config.chains; ++chain) {
    ChainState state;
    try {
      state = init_state(data, cache, variant, config, chain);
    } catch (const Error& e) {
      throw Error(e.kind(), "chain " + std::to_string(chain) + " failed at initialization: " +
                                e.what());
    }
    int stored = 0;
    for (long l = 1; l <= config.total_iters; ++l) {
      try {
        mh_rho_step(state, data, cache, variant, priors);
        const ThetaRecord rec = gibbs_theta_step(state, data, cache, variant);
        gibbs_beta_step(state, data, cache, variant);
        gibbs_variance_step(state, data, cache, variant, priors);

        if (l <= config.burn_in && l % config.adapt_window == 0)
          adapt_tuning(state, config);  // adaptation frozen after burn-in
        if (l == config.burn_in) {
          state.accepts = 0;
          state.proposals = 0;
        }
        if (l > config.burn_in && (l - config.burn_in) % config.thin == 0) {
          const int col = chain * store.per_chain + stored;
          store.theta_fhsc.col(col) = state.theta_fhsc;
          store.theta.col(col) = state.theta;
          store.cond_mean.col(col) = rec.cond_mean_fhsc;
          store.cond_var.col(col) = rec.cond_var_fhsc;
          store.rho[col] = state.rho;
          store.sigma2.col(col) = state.sigma2;
          store.delta.col(col) = state.delta;
          ++stored;
        }
      } catch (const Error& e) {
        throw Error(e.kind(), "chain " + std::to_string(chain) + " failed at iteration " +
                                  std::to_string(l) + ": " + e.what());
      }
    }
    store.accept_rate[chain] =
        state.proposals > 0 ? static_cast<double>(state.accepts) / state.proposals : 0.0;
    store.kappa_final[chain] = state.kappa;
  }
  return store;
}

}  // namespace fhsc
