#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "fhsc/diagnostics.hpp"
#include "fhsc/error.hpp"
#include "fhsc/estimators.hpp"
#include "fhsc/io.hpp"
#include "fhsc/selection.hpp"
#include "fhsc/sim.hpp"

using json = nlohmann::json;
using namespace fhsc;

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw_io("cannot write '" + path + "'");
  out << j.dump(2) << "\n";
}

// Run metadata: everything needed to reproduce the run byte for byte.
void write_metadata(const std::string& path, const std::string& command, const json& args,
                    const json& extra = json::object()) {
  json meta;
  meta["tool"] = "fhsc";
  meta["version"] = FHSC_VERSION;
  meta["command"] = command;
  meta["args"] = args;
  meta["rng"] = Rng::kAlgorithm;
  meta["config_hash"] = fnv1a(args.dump());
  for (auto it = extra.begin(); it != extra.end(); ++it) meta[it.key()] = it.value();
  write_json(path, meta);
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stod(item));
  }
  if (out.empty()) throw_validation("empty numeric list '" + s + "'");
  return out;
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  for (double v : parse_double_list(s)) out.push_back(static_cast<int>(v));
  return out;
}

std::string fmt(double v) { return format_double(v); }

// ----- direct -----

struct DirectArgs {
  std::string micro_path, out_path;
  std::string gvf = "auto";
  double var_floor = 1e-8;
};

int cmd_direct(const DirectArgs& a) {
  const Microdata micro = read_microdata(a.micro_path);
  DirectEstimates direct = hajek_direct(micro);
  int floored = 0;
  if (a.var_floor > 0.0) floored = floor_raw_variances(direct, a.var_floor);

  GvfModel model;
  if (a.gvf == "auto") {
    model = select_gvf(direct);
  } else {
    model = fit_gvf(direct, gvf_variant_from_string(a.gvf));
  }
  direct.smoothed_var = smooth_variances(model, direct);
  write_direct_estimates(a.out_path, direct);

  json args = {{"micro", a.micro_path}, {"out", a.out_path}, {"gvf", a.gvf},
               {"var_floor", a.var_floor}};
  json extra;
  extra["gvf_variant"] = to_string(model.variant);
  extra["gvf_coefficients"] = std::vector<double>(
      model.coefficients.data(), model.coefficients.data() + model.coefficients.size());
  extra["gvf_residual_mse"] = model.residual_mse;
  extra["areas"] = direct.num_areas();
  extra["floored_variances"] = floored;
  write_metadata(a.out_path + ".meta.json", "direct", args, extra);
  return 0;
}

// ----- cluster -----

struct ClusterArgs {
  std::string direct_path, cov_path, out_path;
  int clusters = 3;
  int k_neighbors = 0;  // 0 -> use cluster count
  std::string alpha;    // comma list; empty -> equal weights
  double sigma2_s = 1.0;
  std::uint64_t seed = 0;
  std::string sweep_clusters;  // e.g. "2,3,4"
  std::string sweep_subsets;   // e.g. "0;1;0,1"
};

int cmd_cluster(const ClusterArgs& a) {
  const DirectEstimates direct = read_direct_estimates(a.direct_path);
  const CovariateTable cov_table = read_covariates(a.cov_path);
  const auto perm = join_permutation(cov_table.area_id, direct.area_id);

  ExternalCovariates cov;
  cov.x_star.resize(direct.num_areas(), cov_table.values.cols());
  for (int i = 0; i < direct.num_areas(); ++i) cov.x_star.row(i) = cov_table.values.row(perm[i]);
  cov.sigma2_s = a.sigma2_s;
  if (a.alpha.empty()) {
    cov.alpha = Vector::Constant(cov.x_star.cols(), 1.0 / cov.x_star.cols());
  } else {
    const auto vals = parse_double_list(a.alpha);
    cov.alpha = Eigen::Map<const Vector>(vals.data(), static_cast<long>(vals.size()));
  }

  const int k_n = a.k_neighbors > 0 ? a.k_neighbors : a.clusters;
  const Clustering clustering = spectral_cluster(direct.y, cov, a.clusters, k_n, a.seed);
  write_clustering(a.out_path, direct.area_id, clustering);

  json sidecar;
  sidecar["clusters"] = clustering.num_clusters();
  sidecar["sizes"] = clustering.sizes;
  sidecar["total_wss"] = clustering.total_wss;
  sidecar["k_neighbors"] = k_n;
  if (!a.sweep_clusters.empty()) {
    std::vector<std::vector<int>> subsets;
    if (a.sweep_subsets.empty()) {
      for (int k = 0; k < cov.x_star.cols(); ++k) subsets.push_back({k});
      if (cov.x_star.cols() > 1) {
        std::vector<int> all;
        for (int k = 0; k < cov.x_star.cols(); ++k) all.push_back(k);
        subsets.push_back(all);
      }
    } else {
      std::stringstream ss(a.sweep_subsets);
      std::string part;
      while (std::getline(ss, part, ';'))
        if (!part.empty()) subsets.push_back(parse_int_list(part));
    }
    const auto rows = sweep_clusters(direct.y, cov, parse_int_list(a.sweep_clusters), subsets,
                                     a.k_neighbors, a.seed);
    json sweep = json::array();
    for (const auto& row : rows) {
      json entry;
      entry["subset"] = row.subset;
      entry["clusters"] = row.clusters;
      entry["total_wss"] = row.wss;
      sweep.push_back(entry);
    }
    sidecar["sweep"] = sweep;
  }
  const std::string sidecar_path =
      std::filesystem::path(a.out_path).replace_extension(".json").string();
  write_json(sidecar_path, sidecar);

  json args = {{"direct", a.direct_path},      {"covariates", a.cov_path},
               {"out", a.out_path},            {"clusters", a.clusters},
               {"k_neighbors", a.k_neighbors}, {"alpha", a.alpha},
               {"sigma2_s", a.sigma2_s},       {"seed", a.seed},
               {"sweep_clusters", a.sweep_clusters}, {"sweep_subsets", a.sweep_subsets}};
  write_metadata(a.out_path + ".meta.json", "cluster", args,
                 {{"total_wss", clustering.total_wss}});
  return 0;
}

// ----- fit -----

struct FitArgs {
  std::string direct_path, cov_path, clustering_path, out_dir;
  std::string variant = "fh-sc1";
  long iters = 50000, burn_in = 10000;
  int thin = 4, chains = 2;
  std::uint64_t seed = 0;
  double tuning_init = 0.5;
  std::string benchmark_path;
  double target = 0.0;
  bool have_target = false;
  double gamma_hat = 0.0;
  double ridge = 1e-8;
  std::string rho_prior = "1.1,1.1";
  std::string prec_prior = "1,1";
  bool save_theta_draws = false;
};

int cmd_fit(const FitArgs& a) {
  const DirectEstimates direct = read_direct_estimates(a.direct_path);
  if (direct.smoothed_var.size() != direct.num_areas())
    throw_validation("direct estimates file lacks the D column; run 'fhsc direct' first");
  if ((direct.smoothed_var.array() <= 0.0).any())
    throw_validation("D column must be strictly positive");

  const CovariateTable cov_table = read_covariates(a.cov_path);
  const auto cov_perm = join_permutation(cov_table.area_id, direct.area_id);
  const ClusteringFile cl_file = read_clustering(a.clustering_path);
  const auto cl_perm = join_permutation(cl_file.area_id, direct.area_id);

  FitData data;
  data.y = direct.y;
  data.d = direct.smoothed_var;
  data.x.resize(direct.num_areas(), cov_table.values.cols() + 1);
  data.x.col(0).setOnes();
  std::vector<int> labels(direct.num_areas());
  for (int i = 0; i < direct.num_areas(); ++i) {
    data.x.row(i).tail(cov_table.values.cols()) = cov_table.values.row(cov_perm[i]);
    labels[i] = cl_file.clustering.assignment[cl_perm[i]];
  }
  data.clustering = Clustering::from_assignment(labels);

  ModelVariant variant = ModelVariant::from_name(a.variant);
  variant.gamma_hat = a.gamma_hat;
  variant.ridge_scale = a.ridge;

  Priors priors;
  {
    const auto rp = parse_double_list(a.rho_prior);
    const auto pp = parse_double_list(a.prec_prior);
    if (rp.size() != 2 || pp.size() != 2) throw_validation("priors need two values a,b");
    priors.rho_a = rp[0];
    priors.rho_b = rp[1];
    priors.prec_a = pp[0];
    priors.prec_b = pp[1];
  }

  McmcConfig cfg;
  cfg.total_iters = a.iters;
  cfg.burn_in = a.burn_in;
  cfg.thin = a.thin;
  cfg.chains = a.chains;
  cfg.seed = a.seed;
  cfg.tuning_init = a.tuning_init;

  BenchmarkConstraint constraint;
  bool have_constraint = false;
  if (!a.benchmark_path.empty()) {
    if (!a.have_target) throw_validation("--benchmark requires --target");
    const WeightTable wt = read_weights(a.benchmark_path);
    const auto w_perm = join_permutation(wt.area_id, direct.area_id);
    Vector w(direct.num_areas());
    for (int i = 0; i < direct.num_areas(); ++i) w[i] = wt.w[w_perm[i]];
    constraint = BenchmarkConstraint::scalar(w, a.target);
    constraint.validate(direct.num_areas());
    have_constraint = true;
  }

  std::filesystem::create_directories(a.out_dir);
  const auto out = [&](const std::string& name) {
    return (std::filesystem::path(a.out_dir) / name).string();
  };

  const DrawStore draws = run_chains(data, variant, priors, cfg);
  const EstimateTable table =
      build_estimate_table(draws, data.y, data.d, have_constraint ? &constraint : nullptr);

  // estimates.csv
  {
    std::vector<std::vector<std::string>> rows;
    for (int i = 0; i < direct.num_areas(); ++i) {
      rows.push_back({direct.area_id[i],
                      fmt(table.ergodic[i]),
                      fmt(table.rb[i]),
                      have_constraint ? fmt(table.rb_b[i]) : "",
                      fmt(table.cpmse_rb[i]),
                      have_constraint ? fmt(table.cpmse_rb_b[i]) : "",
                      have_constraint ? fmt(table.pmse_b[i]) : "",
                      fmt(table.cv[i]),
                      have_constraint ? fmt(table.cv_b[i]) : "",
                      fmt(table.residuals[i])});
    }
    write_csv(out("estimates.csv"),
              {"area_id", "ergodic_mean", "rb_estimate", "rb_benchmarked", "cpmse",
               "cpmse_benchmarked", "pmse_benchmarked", "cv", "cv_benchmarked",
               "standardized_residual"},
              rows);
  }

  // scalar draw traces (+ optional theta draws)
  {
    std::vector<std::string> header{"chain", "draw", "rho"};
    for (int k = 0; k < draws.sigma2.rows(); ++k)
      header.push_back("sigma2_" + std::to_string(k + 1));
    for (int k = 0; k < draws.delta.rows(); ++k)
      header.push_back("delta_" + std::to_string(k + 1));
    std::vector<std::vector<std::string>> rows;
    for (int t = 0; t < draws.total_draws(); ++t) {
      std::vector<std::string> row{std::to_string(t / draws.per_chain),
                                   std::to_string(t % draws.per_chain), fmt(draws.rho[t])};
      for (int k = 0; k < draws.sigma2.rows(); ++k) row.push_back(fmt(draws.sigma2(k, t)));
      for (int k = 0; k < draws.delta.rows(); ++k) row.push_back(fmt(draws.delta(k, t)));
      rows.push_back(std::move(row));
    }
    write_csv(out("draws.csv"), header, rows);
  }
  if (a.save_theta_draws) {
    std::vector<std::string> header{"chain", "draw"};
    for (const auto& id : direct.area_id) header.push_back(id);
    std::vector<std::vector<std::string>> rows;
    for (int t = 0; t < draws.total_draws(); ++t) {
      std::vector<std::string> row{std::to_string(t / draws.per_chain),
                                   std::to_string(t % draws.per_chain)};
      for (int i = 0; i < draws.num_areas; ++i) row.push_back(fmt(draws.theta_fhsc(i, t)));
      rows.push_back(std::move(row));
    }
    write_csv(out("theta_draws.csv"), header, rows);
  }

  // credible bands of the (projected) draws
  {
    const Matrix q =
        draw_quantiles(draws, have_constraint ? &constraint : nullptr, {0.025, 0.5, 0.975});
    std::vector<std::vector<std::string>> rows;
    for (int i = 0; i < direct.num_areas(); ++i)
      rows.push_back({direct.area_id[i], fmt(q(i, 0)), fmt(q(i, 1)), fmt(q(i, 2))});
    write_csv(out("quantiles.csv"), {"area_id", "q025", "q500", "q975"}, rows);
  }

  // model selection scores
  {
    json rows = json::array();
    Rng epd_rng(cfg.seed, stream_id(0xE9DULL, 0));
    rows.push_back(
        {{"variant", variant.name},
         {"benchmarked", false},
         {"dic", dic(draws.theta_fhsc, data.y, data.d, table.rb)},
         {"epd_asd", epd(draws.theta_fhsc, data.y, data.d, EpdMeasure::ASD, epd_rng)},
         {"epd_aad", epd(draws.theta_fhsc, data.y, data.d, EpdMeasure::AAD, epd_rng)}});
    if (have_constraint) {
      Matrix projected(draws.num_areas, draws.total_draws());
      for (int t = 0; t < draws.total_draws(); ++t)
        projected.col(t) =
            project_draw(draws.theta_fhsc.col(t), draws.rho[t], draws.clustering, constraint);
      rows.push_back(
          {{"variant", variant.name},
           {"benchmarked", true},
           {"dic", dic(projected, data.y, data.d, table.rb_b)},
           {"epd_asd", epd(projected, data.y, data.d, EpdMeasure::ASD, epd_rng)},
           {"epd_aad", epd(projected, data.y, data.d, EpdMeasure::AAD, epd_rng)}});
    }
    json sel;
    sel["rows"] = rows;
    write_json(out("selection.json"), sel);
  }

  json args = {{"direct", a.direct_path},
               {"covariates", a.cov_path},
               {"clustering", a.clustering_path},
               {"out_dir", a.out_dir},
               {"variant", a.variant},
               {"iters", a.iters},
               {"burn_in", a.burn_in},
               {"thin", a.thin},
               {"chains", a.chains},
               {"seed", a.seed},
               {"tuning_init", a.tuning_init},
               {"benchmark", a.benchmark_path},
               {"target", a.target},
               {"gamma_hat", a.gamma_hat},
               {"ridge", a.ridge},
               {"rho_prior", a.rho_prior},
               {"prec_prior", a.prec_prior}};
  json extra;
  extra["areas"] = direct.num_areas();
  extra["cluster_sizes"] = draws.clustering.sizes;
  extra["accept_rate"] = draws.accept_rate;
  extra["kappa_final"] = draws.kappa_final;
  extra["benchmark_slack"] = table.benchmark_slack;
  {
    json rhat;
    if (variant.rho_free()) rhat["rho"] = split_rhat(draws.rho, draws.chains, draws.per_chain);
    for (int k = 0; k < draws.sigma2.rows(); ++k)
      rhat["sigma2_" + std::to_string(k + 1)] =
          split_rhat(draws.sigma2.row(k).transpose(), draws.chains, draws.per_chain);
    for (int k = 0; k < draws.delta.rows(); ++k)
      rhat["delta_" + std::to_string(k + 1)] =
          split_rhat(draws.delta.row(k).transpose(), draws.chains, draws.per_chain);
    extra["split_rhat"] = rhat;
  }
  write_metadata(out("metadata.json"), "fit", args, extra);
  return 0;
}

// ----- simulate -----

struct SimulateArgs {
  std::string study = "fh";
  std::string out_dir;
  int m = 0;  // 0 -> study default
  int replicates = 100;
  int clusters = 3;
  std::string cor = "0.2";
  std::string rho = "0.01,0.1,0.2";
  double beta0 = std::numeric_limits<double>::quiet_NaN();
  double beta1 = -0.01;
  double sigma2 = 0.25;
  double sigma2_u = 7.0;
  double d_min = 0.1, d_max = 1.0;
  double x_max = 100.0;
  double target = 0.418;
  std::string beta1_rule = "printed";
  long iters = 50000, burn_in = 10000;
  int thin = 4, chains = 2;
  std::uint64_t seed = 1;
  bool fast = false;
  int threads = 0;
};

int cmd_simulate(const SimulateArgs& a) {
  McmcConfig cfg;
  cfg.total_iters = a.fast ? 10000 : a.iters;
  cfg.burn_in = a.fast ? 2000 : a.burn_in;
  cfg.thin = a.thin;
  cfg.chains = a.chains;
  cfg.seed = a.seed;

  std::filesystem::create_directories(a.out_dir);
  const auto out = [&](const std::string& name) {
    return (std::filesystem::path(a.out_dir) / name).string();
  };

  std::vector<SimCell> cells;
  json scenario_meta;
  if (a.study == "fh") {
    for (double cor : parse_double_list(a.cor)) {
      FhScenario sc;
      sc.m = a.m > 0 ? a.m : 100;
      sc.t_rep = a.replicates;
      if (a.fast) {
        sc.m = std::min(sc.m, 100);
        sc.t_rep = std::min(sc.t_rep, 25);
      }
      sc.beta0 = std::isnan(a.beta0) ? 1.0 : a.beta0;
      sc.sigma2 = a.sigma2;
      sc.d_min = a.d_min;
      sc.d_max = a.d_max;
      sc.target_cor = cor;
      sc.printed_beta1_rule = a.beta1_rule == "printed";
      sc.seed = a.seed;
      const SimReport rep = run_fh_study(sc, cfg, a.threads);
      cells.insert(cells.end(), rep.cells.begin(), rep.cells.end());
      scenario_meta["beta1_at_cor_" + fmt(cor)] = sc.beta1();
    }
  } else if (a.study == "fhsc") {
    FhscScenario sc;
    sc.m = a.m > 0 ? a.m : 99;
    sc.clusters = a.clusters;
    sc.t_rep = a.replicates;
    if (a.fast) {
      sc.m = std::min(sc.m, 100);
      sc.t_rep = std::min(sc.t_rep, 25);
    }
    sc.beta0 = std::isnan(a.beta0) ? 0.5 : a.beta0;
    sc.beta1 = a.beta1;
    sc.sigma2_u = a.sigma2_u;
    sc.d_min = a.d_min;
    sc.d_max = a.d_max;
    sc.x_max = a.x_max;
    sc.rho_grid = parse_double_list(a.rho);
    sc.benchmark_target = a.target;
    sc.seed = a.seed;
    const SimReport rep = run_fhsc_study(sc, cfg, a.threads);
    cells = rep.cells;
  } else {
    throw_validation("--study must be fh or fhsc");
  }

  {
    std::vector<std::vector<std::string>> rows;
    for (const auto& c : cells)
      rows.push_back({c.study, c.estimator, std::to_string(c.m),
                      std::isnan(c.cor) ? "" : fmt(c.cor), std::isnan(c.rho) ? "" : fmt(c.rho),
                      std::to_string(c.replicates), std::to_string(c.failed), fmt(c.mse_avg),
                      fmt(c.cpmse_avg), fmt(c.abs_diff_avg), fmt(c.aad), fmt(c.asd)});
    write_csv(out("sim_report.csv"),
              {"study", "estimator", "m", "cor", "rho", "replicates", "failed", "mse_avg",
               "cpmse_avg", "abs_diff_avg", "aad", "asd"},
              rows);
  }
  {
    std::vector<std::vector<std::string>> rows;
    for (const auto& c : cells)
      for (int i = 0; i < c.per_area_diff.size(); ++i)
        rows.push_back({c.study, c.estimator, std::isnan(c.cor) ? "" : fmt(c.cor),
                        std::isnan(c.rho) ? "" : fmt(c.rho), std::to_string(i),
                        fmt(c.per_area_diff[i])});
    write_csv(out("per_area_diff.csv"),
              {"study", "estimator", "cor", "rho", "area_index", "diff"}, rows);
  }

  json args = {{"study", a.study},       {"out_dir", a.out_dir},
               {"m", a.m},               {"replicates", a.replicates},
               {"clusters", a.clusters}, {"cor", a.cor},
               {"rho", a.rho},           {"beta1_rule", a.beta1_rule},
               {"sigma2", a.sigma2},     {"sigma2_u", a.sigma2_u},
               {"d_min", a.d_min},       {"d_max", a.d_max},
               {"x_max", a.x_max},       {"target", a.target},
               {"iters", cfg.total_iters}, {"burn_in", cfg.burn_in},
               {"thin", a.thin},         {"chains", a.chains},
               {"seed", a.seed},         {"fast", a.fast},
               {"threads", a.threads}};
  write_metadata(out("metadata.json"), "simulate", args, scenario_meta);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Small-area estimation with Fay-Herriot models and spectral clustering"};
  app.set_config("--config", "", "TOML config file (flags override file values)");
  app.require_subcommand(1);

  DirectArgs da;
  auto* direct = app.add_subcommand("direct", "Hajek direct estimates + GVF-smoothed variances");
  direct->add_option("--micro", da.micro_path, "Microdata CSV (area_id,y,w)")->required();
  direct->add_option("--out", da.out_path, "Output CSV")->required();
  direct->add_option("--gvf", da.gvf, "GVF variant: gvf1, gvf2 or auto")
      ->check(CLI::IsMember({"gvf1", "gvf2", "auto"}));
  direct->add_option("--var-floor", da.var_floor, "Floor for zero raw variances (0 disables)");

  ClusterArgs ca;
  auto* cluster = app.add_subcommand("cluster", "Spectral clustering of areas");
  cluster->add_option("--direct", ca.direct_path, "Direct estimates CSV")->required();
  cluster->add_option("--covariates", ca.cov_path, "Covariates CSV (area_id,x1..xp)")->required();
  cluster->add_option("--out", ca.out_path, "Clustering CSV output")->required();
  cluster->add_option("--clusters", ca.clusters, "Number of clusters")->required();
  cluster->add_option("--k-neighbors", ca.k_neighbors, "Neighbour count (default: clusters)");
  cluster->add_option("--alpha", ca.alpha, "Covariate mixing weights, comma separated");
  cluster->add_option("--sigma2-s", ca.sigma2_s, "Kernel bandwidth");
  cluster->add_option("--seed", ca.seed, "k-means seed");
  cluster->add_option("--sweep-clusters", ca.sweep_clusters, "Cluster grid for the wss sweep");
  cluster->add_option("--sweep-subsets", ca.sweep_subsets,
                      "Covariate subsets for the sweep, e.g. 0;1;0,1");

  FitArgs fa;
  auto* fit = app.add_subcommand("fit", "Fit a model variant by MCMC and estimate");
  fit->add_option("--direct", fa.direct_path, "Direct estimates CSV with D")->required();
  fit->add_option("--covariates", fa.cov_path, "Covariates CSV")->required();
  fit->add_option("--clustering", fa.clustering_path, "Clustering CSV")->required();
  fit->add_option("--out-dir", fa.out_dir, "Output directory")->required();
  fit->add_option("--variant", fa.variant, "fh, fh-c1, fh-c2, fh-sc1, fh-sc2, fh-sc3");
  fit->add_option("--iters", fa.iters, "Total MCMC iterations per chain");
  fit->add_option("--burn-in", fa.burn_in, "Discarded iterations per chain");
  fit->add_option("--thin", fa.thin, "Thinning stride");
  fit->add_option("--chains", fa.chains, "Number of chains");
  fit->add_option("--seed", fa.seed, "MCMC seed");
  fit->add_option("--tuning-init", fa.tuning_init, "Initial rho proposal sd");
  fit->add_option("--benchmark", fa.benchmark_path, "Benchmark weights CSV (area_id,w)");
  fit->add_option("--target", fa.target, "Benchmark target p")
      ->each([&](const std::string&) { fa.have_target = true; });
  fit->add_option("--gamma-hat", fa.gamma_hat, "Known gamma for fh-c2 / fh-sc3");
  fit->add_option("--ridge", fa.ridge, "Common-effect prior ridge scale");
  fit->add_option("--rho-prior", fa.rho_prior, "Beta prior a,b on rho");
  fit->add_option("--prec-prior", fa.prec_prior, "Gamma prior a,b on precisions");
  fit->add_flag("--save-theta-draws", fa.save_theta_draws, "Also write theta_draws.csv");

  SimulateArgs sa;
  auto* sim = app.add_subcommand("simulate", "Monte Carlo studies");
  sim->add_option("--study", sa.study, "fh or fhsc")->required();
  sim->add_option("--out-dir", sa.out_dir, "Output directory")->required();
  sim->add_option("--m", sa.m, "Number of areas (0: study default)");
  sim->add_option("--replicates", sa.replicates, "Replicates per cell");
  sim->add_option("--clusters", sa.clusters, "Synthetic cluster count (fhsc study)");
  sim->add_option("--cor", sa.cor, "Correlation grid (fh study)");
  sim->add_option("--rho", sa.rho, "Rho grid (fhsc study)");
  sim->add_option("--beta0", sa.beta0, "Intercept (default per study)");
  sim->add_option("--beta1", sa.beta1, "Slope (fhsc study)");
  sim->add_option("--sigma2", sa.sigma2, "Random-effect variance (fh study)");
  sim->add_option("--sigma2-u", sa.sigma2_u, "Random-effect variance (fhsc study)");
  sim->add_option("--d-min", sa.d_min, "Smallest sampling variance");
  sim->add_option("--d-max", sa.d_max, "Largest sampling variance");
  sim->add_option("--x-max", sa.x_max, "Covariate upper bound (fhsc study)");
  sim->add_option("--target", sa.target, "Benchmark target (fhsc study)");
  sim->add_option("--beta1-rule", sa.beta1_rule, "printed or calibrated")
      ->check(CLI::IsMember({"printed", "calibrated"}));
  sim->add_option("--iters", sa.iters, "MCMC iterations");
  sim->add_option("--burn-in", sa.burn_in, "MCMC burn-in");
  sim->add_option("--thin", sa.thin, "Thinning stride");
  sim->add_option("--chains", sa.chains, "Chains");
  sim->add_option("--seed", sa.seed, "Scenario seed");
  sim->add_flag("--fast", sa.fast, "CI budget: T_rep <= 25, m <= 100, L = 10000");
  sim->add_option("--threads", sa.threads, "Worker threads (0: hardware; SAE_THREADS caps)");

  try {
    app.parse(argc, argv);
    if (direct->parsed()) return cmd_direct(da);
    if (cluster->parsed()) return cmd_cluster(ca);
    if (fit->parsed()) return cmd_fit(fa);
    if (sim->parsed()) return cmd_simulate(sa);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;  // validation failures exit 2
  } catch (const Error& e) {
    std::cerr << "fhsc: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "fhsc: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
