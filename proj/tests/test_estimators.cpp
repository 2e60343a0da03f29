#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fhsc/error.hpp"
#include "fhsc/estimators.hpp"
#include "test_util.hpp"

using namespace fhsc;
using fhsc_test::dense_A_blocks;
using fhsc_test::random_matrix;
using fhsc_test::random_vector;

namespace {

// Hand-rolled store with arbitrary content; enough for the estimator algebra.
DrawStore toy_store(Rng& rng, int m, int total, const Clustering& clustering,
                    bool rho_varies = true) {
  DrawStore s;
  s.num_areas = m;
  s.chains = 1;
  s.per_chain = total;
  s.theta_fhsc = random_matrix(rng, m, total, 0.0, 1.0);
  s.theta = s.theta_fhsc;
  s.cond_mean = random_matrix(rng, m, total, 0.0, 1.0);
  s.cond_var = random_matrix(rng, m, total, 0.01, 0.3);
  s.rho.resize(total);
  for (int t = 0; t < total; ++t) s.rho[t] = rho_varies ? rng.uniform(0.05, 0.95) : 1.0;
  s.sigma2 = random_matrix(rng, 1, total, 0.1, 1.0);
  s.delta = random_matrix(rng, 2, total);
  s.clustering = clustering;
  return s;
}

// KKT oracle: solve [[2A, W^T], [W, 0]] [theta_b; lambda] = [2 A s; p] densely.
Vector kkt_projection(const Vector& s, double rho, const Clustering& clustering,
                      const BenchmarkConstraint& c) {
  const int m = static_cast<int>(s.size());
  const int k = c.rows();
  const Matrix a = dense_A_blocks(rho, clustering);
  Matrix sys = Matrix::Zero(m + k, m + k);
  sys.topLeftCorner(m, m) = 2.0 * a;
  sys.topRightCorner(m, k) = c.w.transpose();
  sys.bottomLeftCorner(k, m) = c.w;
  Vector rhs(m + k);
  rhs.head(m) = 2.0 * a * s;
  rhs.tail(k) = c.p;
  return sys.fullPivLu().solve(rhs).head(m);
}

}  // namespace

TEST_CASE("ergodic_mean: single draw, constant draws, summation oracle") {
  Rng rng(81);
  const auto cl = Clustering::from_assignment({0, 0, 1});
  {
    DrawStore s = toy_store(rng, 3, 1, cl);
    CHECK((ergodic_mean(s) - s.theta_fhsc.col(0)).cwiseAbs().maxCoeff() == 0.0);
  }
  {
    DrawStore s = toy_store(rng, 3, 5, cl);
    for (int t = 0; t < 5; ++t) s.theta_fhsc.col(t) = Vector::Constant(3, 0.77);
    CHECK((ergodic_mean(s).array() - 0.77).abs().maxCoeff() < 1e-15);
  }
  {
    DrawStore s = toy_store(rng, 4, 100, Clustering::from_assignment({0, 0, 1, 1}));
    Vector oracle = Vector::Zero(4);
    for (int t = 0; t < 100; ++t) oracle += s.theta_fhsc.col(t);
    oracle /= 100.0;
    CHECK((ergodic_mean(s) - oracle).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("rb_estimate: averages the stored conditional means") {
  Rng rng(82);
  const auto cl = Clustering::from_assignment({0, 1, 1});
  DrawStore s = toy_store(rng, 3, 7, cl);
  for (int t = 0; t < 7; ++t) s.cond_mean.col(t) = Vector::Constant(3, 0.4);
  CHECK((rb_estimate(s).array() - 0.4).abs().maxCoeff() < 1e-15);

  DrawStore missing = s;
  missing.cond_mean.resize(0, 0);
  CHECK_THROWS_AS(rb_estimate(missing), Error);
}

TEST_CASE("project_draw: zero correction, idempotence, KKT oracle") {
  Rng rng(83);
  const auto cl = Clustering::from_assignment({0, 0, 1, 1, 1, 2});
  const int m = 6;
  const Vector w = random_vector(rng, m, 0.1, 1.0);

  {  // already satisfied -> unchanged
    const Vector theta = random_vector(rng, m, 0.0, 1.0);
    const auto c = BenchmarkConstraint::scalar(w, w.dot(theta));
    CHECK((project_draw(theta, 0.4, cl, c) - theta).cwiseAbs().maxCoeff() < 1e-12);
  }
  for (int rep = 0; rep < 25; ++rep) {  // k = 1 oracle + idempotence
    const double rho = rng.uniform(0.05, 1.0);
    const Vector theta = random_vector(rng, m, -1.0, 1.0);
    const auto c = BenchmarkConstraint::scalar(w, rng.uniform(-0.5, 0.5));
    const Vector projected = project_draw(theta, rho, cl, c);
    CHECK(std::abs(c.w.row(0).dot(projected) - c.p[0]) < 1e-10);
    const Vector twice = project_draw(projected, rho, cl, c);
    CHECK((twice - projected).cwiseAbs().maxCoeff() < 1e-12);
    const Vector oracle = kkt_projection(theta, rho, cl, c);
    CHECK((projected - oracle).cwiseAbs().maxCoeff() < 1e-10);
  }
  {  // multi-row constraints against the KKT oracle
    const int k = 3;
    for (int rep = 0; rep < 10; ++rep) {
      BenchmarkConstraint c;
      c.w = random_matrix(rng, k, m);
      c.p = random_vector(rng, k);
      const double rho = rng.uniform(0.05, 1.0);
      const Vector theta = random_vector(rng, m);
      const Vector projected = project_draw(theta, rho, cl, c);
      CHECK((c.w * projected - c.p).cwiseAbs().maxCoeff() < 1e-10);
      CHECK((projected - kkt_projection(theta, rho, cl, c)).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
  {  // rank violation rejected
    BenchmarkConstraint c;
    c.w.resize(2, m);
    c.w.row(0) = w.transpose();
    c.w.row(1) = 2.0 * w.transpose();
    c.p = Vector::Zero(2);
    CHECK_THROWS_AS(project_draw(Vector::Zero(m), 0.5, cl, c), Error);
  }
}

TEST_CASE("projection is linear in theta at fixed (rho, W, p = 0 shift)") {
  Rng rng(84);
  const auto cl = Clustering::from_assignment({0, 1, 0, 1, 2, 2, 0});
  const int m = 7;
  BenchmarkConstraint c;
  c.w = random_matrix(rng, 2, m);
  c.p = Vector::Zero(2);
  const double rho = 0.33;
  const Vector t1 = random_vector(rng, m), t2 = random_vector(rng, m);
  const double a1 = 0.6, a2 = -1.7;
  const Vector lhs = project_draw((a1 * t1 + a2 * t2).eval(), rho, cl, c);
  const Vector rhs = a1 * project_draw(t1, rho, cl, c) + a2 * project_draw(t2, rho, cl, c);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("rb_benchmarked: loop oracle and fixed-rho exactness") {
  Rng rng(85);
  const auto cl = Clustering::from_assignment({0, 0, 1, 1});
  const int m = 4;
  const Vector w = random_vector(rng, m, 0.2, 1.0);
  const auto c = BenchmarkConstraint::scalar(w, 0.418);

  {  // 3-draw loop oracle
    DrawStore s = toy_store(rng, m, 3, cl);
    Vector oracle = Vector::Zero(m);
    for (int t = 0; t < 3; ++t)
      oracle += project_draw(s.cond_mean.col(t), s.rho[t], cl, c);
    oracle /= 3.0;
    CHECK((rb_benchmarked(s, c) - oracle).cwiseAbs().maxCoeff() < 1e-12);
  }
  {  // rho fixed at 1: projection commutes with averaging
    DrawStore s = toy_store(rng, m, 40, cl, /*rho_varies=*/false);
    const Vector rb_b = rb_benchmarked(s, c);
    CHECK(std::abs(c.w.row(0).dot(rb_b) - c.p[0]) < 1e-10);
  }
  {  // conditional means already satisfying the constraint -> rb_b = rb
    DrawStore s = toy_store(rng, m, 10, cl);
    for (int t = 0; t < 10; ++t) {
      Vector col = s.cond_mean.col(t);
      s.cond_mean.col(t) = project_draw(col, s.rho[t], cl, c);
    }
    CHECK((rb_benchmarked(s, c) - rb_estimate(s)).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("benchmark_point: plug-in projection, identity metric at rho = 1") {
  Rng rng(86);
  const auto cl = Clustering::from_assignment({0, 0, 0, 1, 1});
  const int m = 5;
  const Vector est = random_vector(rng, m, 0.0, 1.0);
  const Vector w = random_vector(rng, m, 0.1, 1.0);
  const auto c = BenchmarkConstraint::scalar(w, 0.3);

  {  // already met -> unchanged
    const auto cmet = BenchmarkConstraint::scalar(w, w.dot(est));
    CHECK((benchmark_point(est, 0.7, cl, cmet) - est).cwiseAbs().maxCoeff() < 1e-12);
  }
  {  // rho = 1: theta + W^T (W W^T)^-1 (p - W theta)
    const Vector got = benchmark_point(est, 1.0, cl, c);
    const Vector expected = est + w * (0.3 - w.dot(est)) / w.squaredNorm();
    CHECK((got - expected).cwiseAbs().maxCoeff() < 1e-12);
  }
  {  // cross-check against project_draw at the same rho
    const Vector a = benchmark_point(est, 0.42, cl, c);
    const Vector b = project_draw(est, 0.42, cl, c);
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK_THROWS_AS(benchmark_point(est, 0.0, cl, c), Error);
}

TEST_CASE("scalar_benchmark_coefficients: symmetry, rho = 1, general-projection oracle") {
  Rng rng(87);
  {  // equal weights: uniform correction within each cluster
    const auto cl = Clustering::from_assignment({0, 0, 1, 1, 1});
    const Vector w = Vector::Constant(5, 1.0 / 5.0);
    const auto coeffs = scalar_benchmark_coefficients(w, 0.3, cl);
    for (const auto& a : coeffs)
      CHECK((a.array() - a[0]).abs().maxCoeff() < 1e-14);
  }
  {  // gamma = 1 (rho = 1): w / sum w^2
    const auto cl = Clustering::from_assignment({0, 1, 0});
    Vector w(3);
    w << 0.2, 0.5, 0.3;
    const auto coeffs = scalar_benchmark_coefficients(w, 1.0, cl);
    Vector flat(3);
    for (int c = 0; c < cl.num_clusters(); ++c)
      for (size_t j = 0; j < cl.members[c].size(); ++j)
        flat[cl.members[c][j]] = coeffs[c][static_cast<int>(j)];
    CHECK((flat - w / w.squaredNorm()).cwiseAbs().maxCoeff() < 1e-14);
  }
  {  // single cluster of 5: applying the coefficients reproduces project_draw
    const auto cl = Clustering::from_assignment({0, 0, 0, 0, 0});
    const Vector w = random_vector(rng, 5, 0.1, 1.0);
    const double rho = 0.27;
    const auto c = BenchmarkConstraint::scalar(w, 0.9);
    const Vector theta = random_vector(rng, 5);
    const auto coeffs = scalar_benchmark_coefficients(w, rho, cl);
    const Vector fast = theta + coeffs[0] * (0.9 - w.dot(theta));
    CHECK((fast - project_draw(theta, rho, cl, c)).cwiseAbs().maxCoeff() < 1e-12);
  }
  {  // multi-cluster: still the exact k = 1 projection
    const auto cl = Clustering::from_assignment({0, 1, 1, 2, 2, 2});
    const Vector w = random_vector(rng, 6, 0.1, 1.0);
    const double rho = 0.6;
    const auto c = BenchmarkConstraint::scalar(w, -0.2);
    const Vector theta = random_vector(rng, 6);
    const auto coeffs = scalar_benchmark_coefficients(w, rho, cl);
    const double gap = -0.2 - w.dot(theta);
    Vector fast(6);
    for (int k = 0; k < cl.num_clusters(); ++k)
      for (size_t j = 0; j < cl.members[k].size(); ++j)
        fast[cl.members[k][j]] = theta[cl.members[k][j]] + coeffs[k][static_cast<int>(j)] * gap;
    CHECK((fast - project_draw(theta, rho, cl, c)).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK_THROWS_AS(
      scalar_benchmark_coefficients(Vector::Zero(3), 0.5, Clustering::from_assignment({0, 0, 0})),
      Error);
}

TEST_CASE("cpmse: degenerate store, zero gap, term-by-term oracle") {
  Rng rng(88);
  const auto cl = Clustering::from_assignment({0, 0, 1});
  {  // conditional means all equal the estimate, variances zero -> 0
    DrawStore s = toy_store(rng, 3, 6, cl);
    const Vector est = Vector::Constant(3, 0.5);
    for (int t = 0; t < 6; ++t) {
      s.cond_mean.col(t) = est;
      s.cond_var.col(t).setZero();
    }
    CHECK(cpmse(s, est).cwiseAbs().maxCoeff() == 0.0);
  }
  {  // 3-draw term-by-term oracle
    DrawStore s = toy_store(rng, 3, 3, cl);
    const Vector est = rb_estimate(s);
    Vector oracle = Vector::Zero(3);
    for (int j = 0; j < 3; ++j) {
      double vterm = 0.0, eterm = 0.0;
      for (int t = 0; t < 3; ++t) {
        vterm += s.cond_var(j, t);
        eterm += (s.cond_mean(j, t) - est[j]) * (s.cond_mean(j, t) - est[j]);
      }
      oracle[j] = vterm / 3.0 + eterm / 3.0;
    }
    const Vector got = cpmse(s, est);
    CHECK((got - oracle).cwiseAbs().maxCoeff() < 1e-12);
    // CPMSE >= average conditional-variance term, and >= 0
    CHECK(((got - s.cond_var.rowwise().mean()).array() >= -1e-15).all());
  }
  {  // benchmarked structure: gap identity and zero-gap equality
    DrawStore s = toy_store(rng, 3, 8, cl);
    const Vector rb = rb_estimate(s);
    const Vector cp = cpmse(s, rb);
    CHECK((cpmse_benchmarked(cp, rb, rb) - cp).cwiseAbs().maxCoeff() == 0.0);
    const Vector rb_b = rb.array() + 0.03;
    const Vector cp_b = cpmse_benchmarked(cp, rb, rb_b);
    CHECK(((cp_b - cp) - (rb_b - rb).array().square().matrix()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("pmse: gap-free and constant-draw cases plus a loop oracle") {
  Rng rng(89);
  const auto cl = Clustering::from_assignment({0, 1});
  {
    DrawStore s = toy_store(rng, 2, 9, cl);
    const Vector erg = ergodic_mean(s);
    Vector var = Vector::Zero(2);
    for (int t = 0; t < 9; ++t) var += (s.theta_fhsc.col(t) - erg).array().square().matrix();
    var /= 9.0;
    CHECK((pmse(s, erg, erg) - var).cwiseAbs().maxCoeff() < 1e-14);  // no gap
    const Vector erg_b = erg.array() + 0.1;
    CHECK((pmse(s, erg, erg_b) - (var.array() + 0.01).matrix()).cwiseAbs().maxCoeff() < 1e-12);
  }
  {  // constant draws -> squared gap only
    DrawStore s = toy_store(rng, 2, 4, cl);
    for (int t = 0; t < 4; ++t) s.theta_fhsc.col(t) = Vector::Constant(2, 0.3);
    const Vector erg = ergodic_mean(s);
    const Vector erg_b = erg.array() + 0.2;
    CHECK((pmse(s, erg, erg_b).array() - 0.04).abs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("coefficient_of_variation and standardized residuals") {
  Vector est(3), cp(3);
  est << 0.5, 0.0, 0.8;
  cp << 0.0025, 0.01, 0.0;
  const Vector cv = coefficient_of_variation(est, cp);
  CHECK(cv[0] == doctest::Approx(0.1));
  CHECK(std::isnan(cv[1]));
  CHECK(cv[2] == doctest::Approx(0.0));

  Rng rng(90);
  const Vector y = random_vector(rng, 5, 0.0, 1.0);
  const Vector d = random_vector(rng, 5, 0.1, 0.5);
  CHECK(standardized_residuals(y, d, y).cwiseAbs().maxCoeff() == 0.0);
  const Vector ones = Vector::Constant(5, 1.0);
  const Vector est2 = random_vector(rng, 5);
  CHECK((standardized_residuals(y, ones, est2) - (y - est2)).cwiseAbs().maxCoeff() == 0.0);
  for (int i = 0; i < 5; ++i) {
    const double oracle = (y[i] - est2[i]) / std::sqrt(d[i]);
    CHECK(standardized_residuals(y, d, est2)[i] == doctest::Approx(oracle).epsilon(1e-12));
  }
}

TEST_CASE("draw_quantiles: equal-tailed bands bracket the median") {
  Rng rng(91);
  const auto cl = Clustering::from_assignment({0, 0, 0});
  DrawStore s = toy_store(rng, 3, 500, cl);
  const Matrix q = draw_quantiles(s, nullptr, {0.025, 0.5, 0.975});
  for (int i = 0; i < 3; ++i) {
    CHECK(q(i, 0) < q(i, 1));
    CHECK(q(i, 1) < q(i, 2));
  }
  const Vector w = Vector::Constant(3, 1.0 / 3.0);
  const auto c = BenchmarkConstraint::scalar(w, 0.5);
  const Matrix qb = draw_quantiles(s, &c, {0.025, 0.5, 0.975});
  // projected draws satisfy the constraint, so the weighted median-band stays near p
  const double mid = w.dot(qb.col(1));
  CHECK(mid == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("build_estimate_table: invariants across the whole table") {
  Rng rng(92);
  const auto cl = Clustering::from_assignment({0, 0, 1, 1});
  DrawStore s = toy_store(rng, 4, 50, cl);
  const Vector y = random_vector(rng, 4, 0.0, 1.0);
  const Vector d = random_vector(rng, 4, 0.05, 0.4);
  const Vector w = Vector::Constant(4, 0.25);
  const auto c = BenchmarkConstraint::scalar(w, 0.418);

  const EstimateTable t = build_estimate_table(s, y, d, &c);
  CHECK((t.cpmse_rb.array() >= 0.0).all());
  CHECK(((t.cpmse_rb_b - t.cpmse_rb) -
         (t.rb_b - t.rb).array().square().matrix()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((t.pmse_b.array() >= 0.0).all());
  CHECK(t.benchmark_slack >= 0.0);

  const EstimateTable plain = build_estimate_table(s, y, d, nullptr);
  CHECK(plain.rb_b.size() == 0);
  CHECK(plain.cv.size() == 4);
}
