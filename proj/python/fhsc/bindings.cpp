#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fhsc/diagnostics.hpp"
#include "fhsc/error.hpp"
#include "fhsc/estimators.hpp"
#include "fhsc/io.hpp"
#include "fhsc/selection.hpp"
#include "fhsc/sim.hpp"

namespace py = pybind11;
using namespace fhsc;

namespace {

ModelVariant make_variant(const std::string& name, double gamma_hat, double ridge) {
  ModelVariant v = ModelVariant::from_name(name);
  v.gamma_hat = gamma_hat;
  v.ridge_scale = ridge;
  return v;
}

ExternalCovariates make_cov(const Matrix& x_star, const std::vector<double>& alpha,
                            double sigma2_s) {
  ExternalCovariates cov;
  cov.x_star = x_star;
  if (alpha.empty()) {
    cov.alpha = Vector::Constant(x_star.cols(), 1.0 / x_star.cols());
  } else {
    cov.alpha = Eigen::Map<const Vector>(alpha.data(), static_cast<long>(alpha.size()));
  }
  cov.sigma2_s = sigma2_s;
  return cov;
}

FitData make_fit_data(const Vector& y, const Vector& d, const Matrix& x,
                      const std::vector<int>& assignment) {
  FitData data;
  data.y = y;
  data.d = d;
  data.x = x;
  data.clustering = Clustering::from_assignment(assignment);
  return data;
}

}  // namespace

PYBIND11_MODULE(_fhsc, m) {
  m.doc() = "Fay-Herriot small-area estimation with spectral clustering";
  m.attr("__version__") = FHSC_VERSION;

  py::register_exception<Error>(m, "FhscError");

  // ----- survey -----
  py::class_<DirectEstimates>(m, "DirectEstimates")
      .def_readonly("area_id", &DirectEstimates::area_id)
      .def_readonly("y", &DirectEstimates::y)
      .def_readonly("raw_var", &DirectEstimates::raw_var)
      .def_readonly("n", &DirectEstimates::n)
      .def_readonly("nhat", &DirectEstimates::nhat)
      .def_readonly("D", &DirectEstimates::smoothed_var);

  py::class_<GvfModel>(m, "GvfModel")
      .def_property_readonly("variant", [](const GvfModel& g) { return to_string(g.variant); })
      .def_readonly("coefficients", &GvfModel::coefficients)
      .def_readonly("residual_mse", &GvfModel::residual_mse);

  m.def(
      "hajek_direct",
      [](const std::vector<std::string>& area_id, const Vector& y, const Vector& w) {
        if (y.size() != w.size() || static_cast<size_t>(y.size()) != area_id.size())
          throw_validation("area_id, y, w must have equal length");
        Microdata micro;
        for (int i = 0; i < y.size(); ++i) micro.records.push_back({area_id[i], y[i], w[i]});
        return hajek_direct(micro);
      },
      py::arg("area_id"), py::arg("y"), py::arg("w"),
      "Hajek direct proportions and design variances from microdata records");

  m.def(
      "fit_gvf",
      [](const DirectEstimates& d, const std::string& variant) {
        return fit_gvf(d, gvf_variant_from_string(variant));
      },
      py::arg("direct"), py::arg("variant") = "gvf2");
  m.def("smooth_variances", &smooth_variances, py::arg("model"), py::arg("direct"));
  m.def(
      "floor_raw_variances",
      [](DirectEstimates& d, double eps) { return floor_raw_variances(d, eps); },
      py::arg("direct"), py::arg("eps") = 1e-8);

  // ----- cluster -----
  py::class_<Clustering>(m, "Clustering")
      .def(py::init([](const std::vector<int>& labels) {
             return Clustering::from_assignment(labels);
           }),
           py::arg("assignment"))
      .def_readonly("assignment", &Clustering::assignment)
      .def_readonly("sizes", &Clustering::sizes)
      .def_readonly("total_wss", &Clustering::total_wss)
      .def_property_readonly("num_clusters", &Clustering::num_clusters);

  m.def(
      "similarity_matrices",
      [](const Vector& y, const Matrix& x_star, const std::vector<double>& alpha,
         double sigma2_s) { return similarity_matrices(y, make_cov(x_star, alpha, sigma2_s)); },
      py::arg("y"), py::arg("x_star"), py::arg("alpha") = std::vector<double>{},
      py::arg("sigma2_s") = 1.0);
  m.def(
      "spectral_cluster",
      [](const Vector& y, const Matrix& x_star, int clusters, int k_neighbors,
         const std::vector<double>& alpha, double sigma2_s, std::uint64_t seed) {
        return spectral_cluster(y, make_cov(x_star, alpha, sigma2_s), clusters,
                                k_neighbors > 0 ? k_neighbors : clusters, seed);
      },
      py::arg("y"), py::arg("x_star"), py::arg("clusters"), py::arg("k_neighbors") = 0,
      py::arg("alpha") = std::vector<double>{}, py::arg("sigma2_s") = 1.0, py::arg("seed") = 0);
  m.def("block_laplacian", &block_laplacian, py::arg("clustering"));
  m.def("total_wss", &total_wss, py::arg("y"), py::arg("clustering"));

  // ----- model core -----
  m.def("cluster_gamma", &cluster_gamma, py::arg("rho"), py::arg("n_c"));
  m.def("apply_A_inv", py::overload_cast<const Vector&, double>(&apply_A_inv), py::arg("v"),
        py::arg("rho"));
  m.def("apply_A", py::overload_cast<const Vector&, double>(&apply_A), py::arg("v"),
        py::arg("rho"));
  m.def(
      "conditional_moments",
      [](const Vector& y, const Vector& d, const Matrix& x, const Vector& delta, double sigma2,
         double rho, const std::string& variant, double gamma_hat, double ridge) {
        ClusterBlock block{y, d, x};
        const ModelVariant v = make_variant(variant, gamma_hat, ridge);
        const auto cm =
            conditional_moments(block, delta, PriorCov::make(v, sigma2, block.size()), rho);
        return py::make_tuple(cm.mean_theta, cm.cov_theta, cm.mean_fhsc, cm.cov_fhsc);
      },
      py::arg("y"), py::arg("d"), py::arg("x"), py::arg("delta"), py::arg("sigma2"),
      py::arg("rho"), py::arg("variant") = "fh-sc1", py::arg("gamma_hat") = 0.0,
      py::arg("ridge") = 1e-8,
      "Returns (mean_theta, cov_theta, mean_fhsc, cov_fhsc) for one cluster");

  // ----- sampler -----
  py::class_<DrawStore>(m, "DrawStore")
      .def_readonly("num_areas", &DrawStore::num_areas)
      .def_readonly("chains", &DrawStore::chains)
      .def_readonly("per_chain", &DrawStore::per_chain)
      .def_readonly("theta_fhsc", &DrawStore::theta_fhsc)
      .def_readonly("theta", &DrawStore::theta)
      .def_readonly("cond_mean", &DrawStore::cond_mean)
      .def_readonly("cond_var", &DrawStore::cond_var)
      .def_readonly("rho", &DrawStore::rho)
      .def_readonly("sigma2", &DrawStore::sigma2)
      .def_readonly("delta", &DrawStore::delta)
      .def_readonly("accept_rate", &DrawStore::accept_rate)
      .def_readonly("variant_name", &DrawStore::variant_name)
      .def_readonly("rng_algorithm", &DrawStore::rng_algorithm)
      .def_property_readonly("clustering", [](const DrawStore& s) { return s.clustering; });

  m.def(
      "run_chains",
      [](const Vector& y, const Vector& d, const Matrix& x, const std::vector<int>& assignment,
         const std::string& variant, long iters, long burn_in, int thin, int chains,
         std::uint64_t seed, double tuning_init, double gamma_hat, double ridge, double rho_a,
         double rho_b, double prec_a, double prec_b) {
        const FitData data = make_fit_data(y, d, x, assignment);
        const ModelVariant v = make_variant(variant, gamma_hat, ridge);
        Priors priors;
        priors.rho_a = rho_a;
        priors.rho_b = rho_b;
        priors.prec_a = prec_a;
        priors.prec_b = prec_b;
        McmcConfig cfg;
        cfg.total_iters = iters;
        cfg.burn_in = burn_in;
        cfg.thin = thin;
        cfg.chains = chains;
        cfg.seed = seed;
        cfg.tuning_init = tuning_init;
        return run_chains(data, v, priors, cfg);
      },
      py::arg("y"), py::arg("d"), py::arg("x"), py::arg("assignment"),
      py::arg("variant") = "fh-sc1", py::arg("iters") = 50000, py::arg("burn_in") = 10000,
      py::arg("thin") = 4, py::arg("chains") = 2, py::arg("seed") = 0,
      py::arg("tuning_init") = 0.5, py::arg("gamma_hat") = 0.0, py::arg("ridge") = 1e-8,
      py::arg("rho_a") = 1.1, py::arg("rho_b") = 1.1, py::arg("prec_a") = 1.0,
      py::arg("prec_b") = 1.0, py::call_guard<py::gil_scoped_release>());

  m.def("split_rhat", &split_rhat, py::arg("series"), py::arg("chains"), py::arg("per_chain"));

  // ----- estimators -----
  m.def("ergodic_mean", &ergodic_mean, py::arg("draws"));
  m.def("rb_estimate", &rb_estimate, py::arg("draws"));
  m.def(
      "project_draw",
      [](const Vector& theta_fhsc, double rho, const Clustering& cl, const Vector& w, double p) {
        return project_draw(theta_fhsc, rho, cl, BenchmarkConstraint::scalar(w, p));
      },
      py::arg("theta_fhsc"), py::arg("rho"), py::arg("clustering"), py::arg("w"), py::arg("p"));
  m.def(
      "project_draw_general",
      [](const Vector& theta_fhsc, double rho, const Clustering& cl, const Matrix& w,
         const Vector& p) {
        BenchmarkConstraint c;
        c.w = w;
        c.p = p;
        return project_draw(theta_fhsc, rho, cl, c);
      },
      py::arg("theta_fhsc"), py::arg("rho"), py::arg("clustering"), py::arg("W"), py::arg("p"));
  m.def(
      "rb_benchmarked",
      [](const DrawStore& draws, const Vector& w, double p) {
        return rb_benchmarked(draws, BenchmarkConstraint::scalar(w, p));
      },
      py::arg("draws"), py::arg("w"), py::arg("p"));
  m.def(
      "benchmark_point",
      [](const Vector& est, double rho_hat, const Clustering& cl, const Vector& w, double p) {
        return benchmark_point(est, rho_hat, cl, BenchmarkConstraint::scalar(w, p));
      },
      py::arg("estimate"), py::arg("rho_hat"), py::arg("clustering"), py::arg("w"), py::arg("p"));
  m.def("cpmse", &cpmse, py::arg("draws"), py::arg("theta_hat"));
  m.def("cpmse_benchmarked", &cpmse_benchmarked, py::arg("cpmse"), py::arg("rb"), py::arg("rb_b"));
  m.def("pmse", &pmse, py::arg("draws"), py::arg("ergodic"), py::arg("ergodic_b"));
  m.def("coefficient_of_variation", &coefficient_of_variation, py::arg("estimate"),
        py::arg("cpmse"));
  m.def("standardized_residuals", &standardized_residuals, py::arg("y"), py::arg("d"),
        py::arg("estimate"));
  m.def(
      "draw_quantiles",
      [](const DrawStore& draws, const std::vector<double>& probs) {
        return draw_quantiles(draws, nullptr, probs);
      },
      py::arg("draws"), py::arg("probs") = std::vector<double>{0.025, 0.5, 0.975});

  // ----- selection -----
  m.def("dic", &dic, py::arg("draws"), py::arg("y"), py::arg("d"), py::arg("point_estimate"));
  m.def(
      "epd",
      [](const Matrix& draws, const Vector& y, const Vector& d, const std::string& measure,
         std::uint64_t seed) {
        Rng rng(seed, 0);
        return epd(draws, y, d, measure == "aad" ? EpdMeasure::AAD : EpdMeasure::ASD, rng);
      },
      py::arg("draws"), py::arg("y"), py::arg("d"), py::arg("measure") = "asd",
      py::arg("seed") = 0);

  // ----- simulation harness -----
  py::class_<SimCell>(m, "SimCell")
      .def_readonly("study", &SimCell::study)
      .def_readonly("estimator", &SimCell::estimator)
      .def_readonly("m", &SimCell::m)
      .def_readonly("cor", &SimCell::cor)
      .def_readonly("rho", &SimCell::rho)
      .def_readonly("replicates", &SimCell::replicates)
      .def_readonly("failed", &SimCell::failed)
      .def_readonly("mse_avg", &SimCell::mse_avg)
      .def_readonly("cpmse_avg", &SimCell::cpmse_avg)
      .def_readonly("abs_diff_avg", &SimCell::abs_diff_avg)
      .def_readonly("aad", &SimCell::aad)
      .def_readonly("asd", &SimCell::asd)
      .def_readonly("per_area_diff", &SimCell::per_area_diff);

  m.def(
      "run_fh_study",
      [](int m_areas, int t_rep, double cor, double beta0, double sigma2, double d_min,
         double d_max, bool printed_beta1_rule, std::uint64_t seed, long iters, long burn_in,
         int thin, int chains, int threads) {
        FhScenario sc;
        sc.m = m_areas;
        sc.t_rep = t_rep;
        sc.target_cor = cor;
        sc.beta0 = beta0;
        sc.sigma2 = sigma2;
        sc.d_min = d_min;
        sc.d_max = d_max;
        sc.printed_beta1_rule = printed_beta1_rule;
        sc.seed = seed;
        McmcConfig cfg;
        cfg.total_iters = iters;
        cfg.burn_in = burn_in;
        cfg.thin = thin;
        cfg.chains = chains;
        cfg.seed = seed;
        return run_fh_study(sc, cfg, threads).cells;
      },
      py::arg("m") = 100, py::arg("t_rep") = 100, py::arg("cor") = 0.2, py::arg("beta0") = 1.0,
      py::arg("sigma2") = 0.25, py::arg("d_min") = 0.1, py::arg("d_max") = 1.0,
      py::arg("printed_beta1_rule") = true, py::arg("seed") = 1, py::arg("iters") = 10000,
      py::arg("burn_in") = 2000, py::arg("thin") = 4, py::arg("chains") = 2,
      py::arg("threads") = 0, py::call_guard<py::gil_scoped_release>());

  m.def(
      "run_fhsc_study",
      [](int m_areas, int t_rep, int clusters, const std::vector<double>& rho_grid, double beta0,
         double beta1, double sigma2_u, double d_min, double d_max, double x_max, double target,
         std::uint64_t seed, long iters, long burn_in, int thin, int chains, int threads) {
        FhscScenario sc;
        sc.m = m_areas;
        sc.t_rep = t_rep;
        sc.clusters = clusters;
        sc.rho_grid = rho_grid;
        sc.beta0 = beta0;
        sc.beta1 = beta1;
        sc.sigma2_u = sigma2_u;
        sc.d_min = d_min;
        sc.d_max = d_max;
        sc.x_max = x_max;
        sc.benchmark_target = target;
        sc.seed = seed;
        McmcConfig cfg;
        cfg.total_iters = iters;
        cfg.burn_in = burn_in;
        cfg.thin = thin;
        cfg.chains = chains;
        cfg.seed = seed;
        return run_fhsc_study(sc, cfg, threads).cells;
      },
      py::arg("m") = 99, py::arg("t_rep") = 25, py::arg("clusters") = 3,
      py::arg("rho_grid") = std::vector<double>{0.01, 0.1, 0.2}, py::arg("beta0") = 0.5,
      py::arg("beta1") = -0.01, py::arg("sigma2_u") = 7.0, py::arg("d_min") = 0.1,
      py::arg("d_max") = 1.0, py::arg("x_max") = 100.0, py::arg("target") = 0.418,
      py::arg("seed") = 1, py::arg("iters") = 10000, py::arg("burn_in") = 2000,
      py::arg("thin") = 4, py::arg("chains") = 2, py::arg("threads") = 0,
      py::call_guard<py::gil_scoped_release>());
}
