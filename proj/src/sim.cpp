#include "fhsc/sim.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "fhsc/error.hpp"

namespace fhsc {

namespace {

constexpr std::uint64_t kStreamX = 0x78;
constexpr std::uint64_t kStreamW = 0x77;
constexpr std::uint64_t kStreamRep = 0x52;
constexpr std::uint64_t kStreamFit = 0x46;

Vector equally_spaced(double lo, double hi, int m) {
  Vector d(m);
  if (m == 1) {
    d[0] = lo;
    return d;
  }
  for (int i = 0; i < m; ++i) d[i] = lo + (hi - lo) * i / (m - 1);
  return d;
}

Clustering near_equal_clusters(int m, int c) {
  std::vector<int> labels(m);
  const int base = m / c, extra = m % c;
  int idx = 0;
  for (int k = 0; k < c; ++k) {
    const int nk = base + (k < extra ? 1 : 0);
    for (int j = 0; j < nk; ++j) labels[idx++] = k;
  }
  return Clustering::from_assignment(labels);
}

template <typename Fn>
void parallel_for(int n, int threads, Fn&& fn) {
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&]() {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n) return;
        fn(i);
      }
    });
  }
  for (auto& th : pool) th.join();
}

struct RepOutcome {
  bool ok = false;
  std::string error;
  // keyed by estimator label
  std::vector<std::string> labels;
  std::vector<Vector> estimates;
  std::vector<Vector> cpmses;
  Vector theta_true;
};

struct Accumulator {
  int m = 0;
  int used = 0;
  int failed = 0;
  Vector se_sum, cpmse_sum;  // per area
  double aad_sum = 0.0, asd_sum = 0.0;

  void init(int areas) {
    m = areas;
    se_sum = Vector::Zero(areas);
    cpmse_sum = Vector::Zero(areas);
  }
  void add(const Vector& est, const Vector& cp, const Vector& truth) {
    se_sum += (est - truth).array().square().matrix();
    cpmse_sum += cp;
    aad_sum += (est - truth).cwiseAbs().mean();
    asd_sum += (est - truth).array().square().mean();
    ++used;
  }
  void fill(SimCell& cell) const {
    cell.replicates = used;
    cell.failed = failed;
    if (used == 0) return;
    const Vector mse_hat = se_sum / used;
    const Vector cpmse_hat = cpmse_sum / used;
    cell.mse_avg = mse_hat.mean();
    cell.cpmse_avg = cpmse_hat.mean();
    cell.abs_diff_avg = std::abs(cell.cpmse_avg - cell.mse_avg);
    cell.aad = aad_sum / used;
    cell.asd = asd_sum / used;
    cell.per_area_diff = cpmse_hat - mse_hat;
  }
};

}  // namespace

double FhScenario::beta1() const {
  const double dbar = 0.5 * (d_min + d_max);
  const double denom = 1.0 - target_cor * target_cor;
  const double num = printed_beta1_rule ? 12.0 * (dbar + sigma2)
                                        : 12.0 * (dbar + sigma2) * target_cor * target_cor;
  return std::sqrt(num / denom);
}

void FhScenario::validate() const {
  if (m < 2 || t_rep < 1) throw_validation("FH scenario needs m >= 2 and t_rep >= 1");
  if (!(sigma2 >= 0.0)) throw_validation("sigma2 must be nonnegative");
  if (!(d_min > 0.0) || d_max < d_min) throw_validation("need 0 < d_min <= d_max");
  if (!(std::abs(target_cor) < 1.0)) throw_validation("|cor| must be below 1");
}

void FhscScenario::validate() const {
  if (m < clusters || clusters < 1) throw_validation("FH-SC scenario needs m >= clusters >= 1");
  if (t_rep < 1) throw_validation("t_rep must be >= 1");
  if (!(sigma2_u > 0.0)) throw_validation("sigma2_u must be positive");
  if (!(d_min > 0.0) || d_max < d_min) throw_validation("need 0 < d_min <= d_max");
  if (rho_grid.empty()) throw_validation("empty rho grid");
  for (double r : rho_grid)
    if (!(r > 0.0) || r > 1.0) throw_validation("rho values must lie in (0, 1]");
}

SimDataset generate_fh_dataset(const FhScenario& scenario, int rep) {
  scenario.validate();
  const int m = scenario.m;
  SimDataset out;

  Rng xrng(scenario.seed, kStreamX);
  Vector x(m);
  for (int i = 0; i < m; ++i) x[i] = xrng.uniform();

  out.data.d = equally_spaced(scenario.d_min, scenario.d_max, m);
  out.data.x.resize(m, 2);
  out.data.x.col(0).setOnes();
  out.data.x.col(1) = x;
  out.data.clustering = near_equal_clusters(m, 1);

  const double b1 = scenario.beta1();
  Rng rng(scenario.seed, stream_id(kStreamRep, static_cast<std::uint64_t>(rep)));
  out.theta_true.resize(m);
  out.data.y.resize(m);
  for (int i = 0; i < m; ++i) {
    const double u = std::sqrt(scenario.sigma2) * rng.normal();
    out.theta_true[i] = scenario.beta0 + b1 * x[i] + u;
    out.data.y[i] = out.theta_true[i] + std::sqrt(out.data.d[i]) * rng.normal();
  }
  out.constraint =
      BenchmarkConstraint::scalar(Vector::Constant(m, 1.0 / m), out.theta_true.mean());
  return out;
}

SimDataset generate_fhsc_dataset(const FhscScenario& scenario, double rho_true, int rep) {
  scenario.validate();
  if (!(rho_true > 0.0) || rho_true > 1.0) throw_validation("rho_true must lie in (0, 1]");
  const int m = scenario.m;
  SimDataset out;

  Rng xrng(scenario.seed, kStreamX);
  Vector x(m);
  for (int i = 0; i < m; ++i) x[i] = xrng.uniform(0.0, scenario.x_max);
  Rng wrng(scenario.seed, kStreamW);
  Vector w(m);
  for (int i = 0; i < m; ++i) w[i] = wrng.uniform(1.0, 3.0);
  w /= w.sum();

  out.data.d = equally_spaced(scenario.d_min, scenario.d_max, m);
  out.data.x.resize(m, 2);
  out.data.x.col(0).setOnes();
  out.data.x.col(1) = x;
  out.data.clustering = near_equal_clusters(m, scenario.clusters);

  const Vector xb = scenario.beta0 * Vector::Ones(m) + scenario.beta1 * x;
  Rng rng(scenario.seed, stream_id(kStreamRep, static_cast<std::uint64_t>(rep)));
  Vector theta(m);
  for (int i = 0; i < m; ++i) theta[i] = xb[i] + std::sqrt(scenario.sigma2_u) * rng.normal();
  out.theta_true = apply_A_inv_blocks(theta, rho_true, out.data.clustering);
  out.data.y.resize(m);
  for (int i = 0; i < m; ++i)
    out.data.y[i] = out.theta_true[i] + std::sqrt(out.data.d[i]) * rng.normal();
  out.constraint = BenchmarkConstraint::scalar(w, scenario.benchmark_target);
  return out;
}

int resolve_threads(int requested) {
  int threads = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
  if (threads < 1) threads = 1;
  if (const char* env = std::getenv("SAE_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) threads = std::min(threads, cap);
  }
  return threads;
}

SimReport run_fh_study(const FhScenario& scenario, const McmcConfig& mcmc, int threads) {
  scenario.validate();
  mcmc.validate();
  const ModelVariant fh = ModelVariant::from_name("fh");
  const Priors priors;

  std::vector<RepOutcome> outcomes(scenario.t_rep);
  parallel_for(scenario.t_rep, resolve_threads(threads), [&](int rep) {
    RepOutcome& rr = outcomes[rep];
    try {
      const SimDataset ds = generate_fh_dataset(scenario, rep);
      McmcConfig cfg = mcmc;
      cfg.seed = stream_id(stream_id(kStreamFit, scenario.seed), static_cast<std::uint64_t>(rep));
      const DrawStore draws = run_chains(ds.data, fh, priors, cfg);
      const Vector rb = rb_estimate(draws);
      const Vector rb_b = rb_benchmarked(draws, ds.constraint);
      const Vector cp = cpmse(draws, rb);
      const Vector cp_b = cpmse_benchmarked(cp, rb, rb_b);
      rr.labels = {"fh-b"};
      rr.estimates = {rb_b};
      rr.cpmses = {cp_b};
      rr.theta_true = ds.theta_true;
      rr.ok = true;
    } catch (const std::exception& e) {
      rr.error = e.what();
    }
  });

  Accumulator acc;
  acc.init(scenario.m);
  for (const auto& rr : outcomes) {
    if (!rr.ok) {
      acc.failed++;
      log_warning("FH study replicate failed: " + rr.error);
      continue;
    }
    acc.add(rr.estimates[0], rr.cpmses[0], rr.theta_true);
  }

  SimReport report;
  SimCell cell;
  cell.study = "fh";
  cell.estimator = "fh-b";
  cell.m = scenario.m;
  cell.cor = scenario.target_cor;
  acc.fill(cell);
  report.cells.push_back(std::move(cell));
  return report;
}

SimReport run_fhsc_study(const FhscScenario& scenario, const McmcConfig& mcmc, int threads) {
  scenario.validate();
  mcmc.validate();
  const ModelVariant fhsc1 = ModelVariant::from_name("fh-sc1");
  const ModelVariant fh = ModelVariant::from_name("fh");
  const Priors priors;
  const std::vector<std::string> labels = {"fh-sc1", "fh", "fh-sc1-b", "fh-b"};

  SimReport report;
  for (double rho_true : scenario.rho_grid) {
    std::vector<RepOutcome> outcomes(scenario.t_rep);
    parallel_for(scenario.t_rep, resolve_threads(threads), [&](int rep) {
      RepOutcome& rr = outcomes[rep];
      try {
        const SimDataset ds = generate_fhsc_dataset(scenario, rho_true, rep);
        McmcConfig cfg = mcmc;
        cfg.seed =
            stream_id(stream_id(kStreamFit, scenario.seed), static_cast<std::uint64_t>(rep));
        const DrawStore d_sc = run_chains(ds.data, fhsc1, priors, cfg);
        const DrawStore d_fh = run_chains(ds.data, fh, priors, cfg);

        const Vector rb_sc = rb_estimate(d_sc);
        const Vector rb_fh = rb_estimate(d_fh);
        const Vector cp_sc = cpmse(d_sc, rb_sc);
        const Vector cp_fh = cpmse(d_fh, rb_fh);
        const Vector rbb_sc = rb_benchmarked(d_sc, ds.constraint);
        const Vector rbb_fh = rb_benchmarked(d_fh, ds.constraint);

        rr.labels = labels;
        rr.estimates = {rb_sc, rb_fh, rbb_sc, rbb_fh};
        rr.cpmses = {cp_sc, cp_fh, cpmse_benchmarked(cp_sc, rb_sc, rbb_sc),
                     cpmse_benchmarked(cp_fh, rb_fh, rbb_fh)};
        rr.theta_true = ds.theta_true;
        rr.ok = true;
      } catch (const std::exception& e) {
        rr.error = e.what();
      }
    });

    for (size_t k = 0; k < labels.size(); ++k) {
      Accumulator acc;
      acc.init(scenario.m);
      for (const auto& rr : outcomes) {
        if (!rr.ok) {
          acc.failed++;
          if (k == 0) log_warning("FH-SC study replicate failed: " + rr.error);
          continue;
        }
        acc.add(rr.estimates[k], rr.cpmses[k], rr.theta_true);
      }
      SimCell cell;
      cell.study = "fhsc";
      cell.estimator = labels[k];
      cell.m = scenario.m;
      cell.rho = rho_true;
      acc.fill(cell);
      report.cells.push_back(std::move(cell));
    }
  }
  return report;
}

}  // namespace fhsc
