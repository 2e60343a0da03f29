#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fhsc/error.hpp"
#include "fhsc/model.hpp"
#include "test_util.hpp"

using namespace fhsc;
using fhsc_test::dense_A;
using fhsc_test::random_matrix;
using fhsc_test::random_vector;

namespace {

ClusterBlock random_block(Rng& rng, int n, int p = 2) {
  ClusterBlock b;
  b.y = random_vector(rng, n, 0.0, 1.0);
  b.d = random_vector(rng, n, 0.05, 0.8);
  b.x = random_matrix(rng, n, p);
  b.x.col(0).setOnes();
  return b;
}

}  // namespace

TEST_CASE("apply_A_inv: rho = 1 is the identity, constants are fixed points") {
  Rng rng(41);
  const Vector v = random_vector(rng, 7);
  CHECK((apply_A_inv(v, 1.0) - v).cwiseAbs().maxCoeff() == 0.0);

  const Vector c = Vector::Constant(9, 3.25);
  for (double rho : {0.05, 0.4, 0.93}) {
    CHECK((apply_A_inv(c, rho) - c).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((apply_A(c, rho) - c).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("apply_A_inv: matches dense inversion of I + ((1-rho)/rho) L") {
  Rng rng(42);
  const int n = 7;
  const double rho = 0.3;
  const Vector v = random_vector(rng, n);
  const Vector dense = dense_A(rho, n).ldlt().solve(v);
  CHECK((apply_A_inv(v, rho) - dense).cwiseAbs().maxCoeff() < 1e-10);
  CHECK_THROWS_AS(apply_A_inv(v, 0.0), Error);
  CHECK_THROWS_AS(apply_A_inv(v, 1.5), Error);
}

TEST_CASE("Sherman-Morrison identity for n_c up to 20") {
  Rng rng(43);
  for (int n = 1; n <= 20; ++n) {
    for (int rep = 0; rep < 10; ++rep) {
      const double rho = rng.uniform(1e-3, 1.0);
      const double g = cluster_gamma(rho, n);
      Matrix ainv = Matrix::Constant(n, n, (1.0 - g) / n);
      ainv.diagonal().array() += g;
      const Matrix prod = dense_A(rho, n) * ainv;
      CHECK((prod - Matrix::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("gamma_c strictly increasing in rho, strictly decreasing in n_c") {
  for (int n : {2, 5, 11}) {
    double prev = 0.0;
    for (double rho = 0.05; rho <= 1.0; rho += 0.05) {
      const double g = cluster_gamma(rho, n);
      CHECK(g > prev);
      prev = g;
    }
  }
  for (double rho : {0.1, 0.5, 0.9}) {
    double prev = 2.0;
    for (int n : {1, 2, 4, 9, 20}) {
      const double g = cluster_gamma(rho, n);
      if (n > 1) CHECK(g < prev);
      prev = g;
    }
  }
}

TEST_CASE("log_det_A matches the dense determinant") {
  Rng rng(44);
  for (int n : {1, 2, 6, 13}) {
    const double rho = rng.uniform(0.05, 0.99);
    const double dense = std::log(dense_A(rho, n).determinant());
    CHECK(log_det_A(rho, n) == doctest::Approx(dense).epsilon(1e-9));
  }
}

TEST_CASE("PriorCov: solve/quad/log_det agree with dense algebra for every structure") {
  Rng rng(45);
  const int n = 8;
  ModelVariant identity = ModelVariant::from_name("fh-sc1");
  ModelVariant common = ModelVariant::from_name("fh-sc2");
  ModelVariant cpa = ModelVariant::from_name("fh-sc3");
  cpa.gamma_hat = 0.37;
  for (const auto& variant : {identity, common, cpa}) {
    const double s2 = rng.uniform(0.2, 2.0);
    const PriorCov prior = PriorCov::make(variant, s2, n);
    const Matrix dense = prior.dense();
    const Vector v = random_vector(rng, n);
    const Vector solved = dense.ldlt().solve(v);
    CHECK((prior.solve(v) - solved).cwiseAbs().maxCoeff() < 1e-8 * solved.cwiseAbs().maxCoeff());
    CHECK(prior.quad(v) == doctest::Approx(v.dot(solved)).epsilon(1e-8));
    CHECK(prior.log_det() ==
          doctest::Approx(std::log(dense.determinant())).epsilon(1e-6));
  }
  // the third branch: (gamma_hat 11^T + I) inverse against dense inversion, n <= 10
  for (int n2 : {2, 5, 10}) {
    const PriorCov prior = PriorCov::make(cpa, 1.0, n2);
    Matrix zhz = Matrix::Constant(n2, n2, cpa.gamma_hat);
    zhz.diagonal().array() += 1.0;
    const Matrix inv_dense = zhz.inverse();
    for (int j = 0; j < n2; ++j) {
      const Vector e = Vector::Unit(n2, j);
      CHECK((prior.solve(e) - inv_dense.col(j)).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("conditional_moments: classical FH shrinkage at rho = 1") {
  Rng rng(46);
  const int n = 6;
  ClusterBlock b = random_block(rng, n);
  const Vector delta = random_vector(rng, 2);
  const double s2 = 0.3;
  const PriorCov prior = PriorCov::make(ModelVariant::from_name("fh"), s2, n);
  const auto cm = conditional_moments(b, delta, prior, 1.0);
  const Vector xd = b.x * delta;
  for (int j = 0; j < n; ++j) {
    const double gstar = s2 / (s2 + b.d[j]);
    CHECK(cm.mean_theta[j] == doctest::Approx(gstar * b.y[j] + (1 - gstar) * xd[j]).epsilon(1e-12));
    CHECK(cm.cov_theta(j, j) == doctest::Approx(s2 * b.d[j] / (s2 + b.d[j])).epsilon(1e-12));
    CHECK(cm.mean_fhsc[j] == doctest::Approx(cm.mean_theta[j]).epsilon(1e-12));
  }
}

TEST_CASE("conditional_moments: D -> infinity collapses to the prior mean") {
  Rng rng(47);
  const int n = 5;
  ClusterBlock b = random_block(rng, n);
  b.d = Vector::Constant(n, 1e8);
  const Vector delta = random_vector(rng, 2);
  const PriorCov prior = PriorCov::make(ModelVariant::from_name("fh-sc1"), 0.5, n);
  const auto cm = conditional_moments(b, delta, prior, 0.6);
  const Vector xd = b.x * delta;
  for (int j = 0; j < n; ++j)
    CHECK(cm.mean_theta[j] == doctest::Approx(xd[j]).epsilon(1e-3));
}

TEST_CASE("conditional_moments: joint-normal conditioning oracle") {
  Rng rng(48);
  for (int rep = 0; rep < 8; ++rep) {
    const int n = 4;
    ClusterBlock b = random_block(rng, n);
    const Vector delta = random_vector(rng, 2);
    const double rho = rng.uniform(0.1, 1.0);
    const double s2 = rng.uniform(0.2, 1.5);

    ModelVariant variant = ModelVariant::from_name("fh-sc3");
    variant.gamma_hat = rng.uniform(0.1, 0.9);
    const PriorCov prior = PriorCov::make(variant, s2, n);

    // Oracle: condition the joint normal of (theta, y) directly.
    //   theta ~ N(X delta, Sigma); y = A^-1 theta + e, e ~ N(0, D)
    const Matrix sigma = prior.dense();
    const Matrix ainv = dense_A(rho, n).inverse();
    const Matrix cov_yy = ainv * sigma * ainv.transpose() + Matrix(b.d.asDiagonal());
    const Matrix cov_ty = sigma * ainv.transpose();
    const Vector xd = b.x * delta;
    const Vector mean_y = ainv * xd;
    const Matrix gain = cov_ty * cov_yy.inverse();
    const Vector mean_oracle = xd + gain * (b.y - mean_y);
    const Matrix cov_oracle = sigma - gain * cov_ty.transpose();

    const auto cm = conditional_moments(b, delta, prior, rho);
    CHECK((cm.mean_theta - mean_oracle).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((cm.cov_theta - cov_oracle).cwiseAbs().maxCoeff() < 1e-8);
    // the smoothed pieces inherit the A^-1 transform
    CHECK((cm.mean_fhsc - ainv * mean_oracle).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((cm.cov_fhsc - ainv * cov_oracle * ainv.transpose()).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("conditional_moments: covariances symmetric PSD") {
  Rng rng(49);
  const int n = 7;
  ClusterBlock b = random_block(rng, n);
  const Vector delta = random_vector(rng, 2);
  const PriorCov prior = PriorCov::make(ModelVariant::from_name("fh-sc2"), 0.8, n);
  const auto cm = conditional_moments(b, delta, prior, 0.25);
  CHECK((cm.cov_theta - cm.cov_theta.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((cm.cov_fhsc - cm.cov_fhsc.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  Eigen::SelfAdjointEigenSolver<Matrix> e1(cm.cov_theta), e2(cm.cov_fhsc);
  CHECK(e1.eigenvalues().minCoeff() > -1e-10);
  CHECK(e2.eigenvalues().minCoeff() > -1e-10);
  CHECK(cm.cov_fhsc.diagonal().minCoeff() >= 0.0);
}

TEST_CASE("rho = 1 FH-SC1 equals FH entrywise") {
  Rng rng(50);
  const int n = 6;
  ClusterBlock b = random_block(rng, n);
  const Vector delta = random_vector(rng, 2);
  const double s2 = 0.4;
  const auto fh = conditional_moments(b, delta, PriorCov::make(ModelVariant::from_name("fh"), s2, n), 1.0);
  const auto sc = conditional_moments(b, delta, PriorCov::make(ModelVariant::from_name("fh-sc1"), s2, n), 1.0);
  CHECK((fh.mean_theta - sc.mean_theta).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((fh.cov_theta - sc.cov_theta).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((fh.mean_fhsc - sc.mean_fhsc).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((fh.cov_fhsc - sc.cov_fhsc).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("fhsc_mean_decomposition: algebraic identity with apply_A_inv") {
  Rng rng(51);
  const int n = 6;
  ClusterBlock b = random_block(rng, n);
  const Vector delta = random_vector(rng, 2);
  const PriorCov prior = PriorCov::make(ModelVariant::from_name("fh-sc1"), 0.6, n);

  {  // gamma = 1 returns the mean unchanged
    const auto cm = conditional_moments(b, delta, prior, 1.0);
    CHECK((fhsc_mean_decomposition(cm, 1.0) - cm.mean_theta).cwiseAbs().maxCoeff() < 1e-12);
  }
  for (double rho : {0.03, 0.4, 0.97}) {
    const auto cm = conditional_moments(b, delta, prior, rho);
    CHECK((fhsc_mean_decomposition(cm, rho) - apply_A_inv(cm.mean_theta, rho))
              .cwiseAbs()
              .maxCoeff() < 1e-12);
    CHECK((fhsc_mean_decomposition(cm, rho) - cm.mean_fhsc).cwiseAbs().maxCoeff() < 1e-12);
  }
  {  // rho -> 0: every entry approaches the cluster average of the means
    const double rho = 1e-8;
    const auto cm = conditional_moments(b, delta, prior, rho);
    const double avg = cm.mean_theta.mean();
    for (int j = 0; j < n; ++j) CHECK(std::abs(cm.mean_fhsc[j] - avg) < 1e-6);
  }
}

TEST_CASE("variance display differs from the sandwich and is reported separately") {
  Rng rng(52);
  const int n = 5;
  ClusterBlock b = random_block(rng, n);
  const Vector delta = random_vector(rng, 2);
  const PriorCov prior = PriorCov::make(ModelVariant::from_name("fh-sc1"), 0.6, n);
  const auto cm = conditional_moments(b, delta, prior, 0.3);
  const Matrix display = fhsc_variance_display(cm, 0.3);
  CHECK(display.rows() == n);
  // the exact sandwich is what cov_fhsc carries; the display is a diagnostic
  CHECK((display - cm.cov_fhsc).cwiseAbs().maxCoeff() > 1e-8);
}

TEST_CASE("model variant table mapping and validation") {
  const auto fh = ModelVariant::from_name("fh");
  CHECK(fh.rho_mode == RhoMode::FixedOne);
  CHECK(fh.z_structure == ZStructure::Identity);
  const auto sc2 = ModelVariant::from_name("fh-sc2");
  CHECK(sc2.rho_free());
  CHECK(sc2.z_structure == ZStructure::CommonEffect);
  CHECK(sc2.variance_sharing == VarianceSharing::PerCluster);
  const auto sc3 = ModelVariant::from_name("fh-sc3");
  CHECK(sc3.beta_sharing == BetaSharing::PerCluster);
  CHECK_THROWS_AS(sc3.validate(), Error);  // gamma_hat missing
  CHECK_THROWS_AS(ModelVariant::from_name("nope"), Error);

  ModelVariant bad = ModelVariant::from_name("fh-sc2");
  ClusterBlock b;
  b.y = Vector::Zero(3);
  b.d = Vector::Constant(3, -1.0);
  b.x = Matrix::Ones(3, 1);
  CHECK_THROWS_AS(b.validate(), Error);
  (void)bad;
}
