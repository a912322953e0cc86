#include <gtest/gtest.h>

#include <algorithm>
#include <numbers>

#include "dgvi/errors.hpp"
#include "dgvi/oracle.hpp"
#include "dgvi/vi.hpp"
#include "test_util.hpp"

using namespace dgvi;
using testutil::max_abs;

namespace {

std::vector<GaussianBelief> unit_circle_priors() {
  std::vector<GaussianBelief> priors;
  for (int k = 0; k < 4; ++k) {
    const double a = k * std::numbers::pi / 2.0;
    priors.emplace_back(Vector{{std::cos(a), std::sin(a)}}, Matrix::Identity(2, 2));
  }
  return priors;
}

}  // namespace

TEST(ConjugateFusion, VanishingObservationPrecisionGivesFusedPrior) {
  std::mt19937_64 rng(1);
  std::vector<GaussianBelief> priors;
  for (int j = 0; j < 3; ++j)
    priors.emplace_back(testutil::random_vector(3, rng), testutil::random_spd(3, rng));
  const std::vector<double> w{0.2, 0.5, 0.3};
  const LinearGaussianModel model{Matrix::Identity(3, 3), 1e-20 * Matrix::Identity(3, 3)};
  const auto post = conjugate_fusion_posterior(priors, w, model, Vector::Ones(3));
  const auto fused = geometric_fuse(priors, w);
  EXPECT_LE(max_abs(post.mean(), fused.mean()), 1e-12);
  EXPECT_LE(max_abs(post.information(), fused.information()), 1e-12);
}

TEST(ConjugateFusion, ScalarTextbookCase) {
  const std::vector<GaussianBelief> priors{GaussianBelief::isotropic(1, 1.0)};
  const LinearGaussianModel model{Matrix::Ones(1, 1), Matrix::Ones(1, 1)};
  const auto post = conjugate_fusion_posterior(priors, std::vector<double>{1.0}, model, Vector{{2.0}});
  EXPECT_NEAR(post.mean()(0), 1.0, 1e-15);
  EXPECT_NEAR(post.information()(0, 0), 2.0, 1e-15);
}

TEST(ConjugateFusion, AgreesWithFuseThenRegressionUpdate) {
  std::mt19937_64 rng(2);
  std::vector<GaussianBelief> priors;
  for (int j = 0; j < 3; ++j)
    priors.emplace_back(testutil::random_vector(4, rng), testutil::random_spd(4, rng));
  const std::vector<double> w{0.4, 0.4, 0.2};
  Matrix h(2, 4);
  for (auto& v : h.reshaped()) v = std::normal_distribution<double>()(rng);
  const LinearGaussianModel model{h, testutil::random_spd(2, rng)};
  const Vector z = testutil::random_vector(2, rng);
  const auto post = conjugate_fusion_posterior(priors, w, model, z);
  const auto step = dgvi_regression_step(priors, w, h.transpose(), z, model.obs_precision);
  EXPECT_LE(max_abs(post.mean(), step.mean()), 1e-10);
  EXPECT_LE(max_abs(post.information(), step.information()), 1e-10);
}

TEST(ParticleFusion, ExampleOneMatchesConjugateMean) {
  const auto priors = unit_circle_priors();
  const std::vector<double> w(4, 0.25);
  const LinearGaussianModel model{Matrix::Identity(2, 2), Matrix::Identity(2, 2)};
  const Vector z{{1.0, 1.0}};
  const auto exact = conjugate_fusion_posterior(priors, w, model, z);
  EXPECT_LE(max_abs(exact.mean(), Vector{{0.5, 0.5}}), 1e-14);
  const auto res = particle_fusion_posterior(priors, w, model, z, 100000, 7);
  EXPECT_LE((res.fitted.mean() - exact.mean()).norm(), 0.1);
  EXPECT_EQ(res.particles.rows(), 100000);
  // fitted covariance is a proper moment fit
  EXPECT_EQ(Eigen::LLT<Matrix>(res.fitted.covariance()).info(), Eigen::Success);
}

TEST(ParticleFusion, FlatLikelihoodResamplesThePrior) {
  const GaussianBelief prior(Vector{{1.0, -2.0}}, Matrix::Identity(2, 2) * 4.0);
  const std::vector<GaussianBelief> priors{prior};
  const LinearGaussianModel flat{Matrix::Zero(1, 2), Matrix::Ones(1, 1)};
  const int n = 20000;
  const auto res = particle_fusion_posterior(priors, std::vector<double>{1.0}, flat,
                                             Vector::Zero(1), n, 3);
  const double sigma = 0.5;
  EXPECT_LE(max_abs(res.fitted.mean(), prior.mean()), 3.0 * sigma / std::sqrt(n) * 2.0);
}

TEST(ParticleFusion, RepeatableAndValidated) {
  const auto priors = unit_circle_priors();
  const std::vector<double> w(4, 0.25);
  const LinearGaussianModel model{Matrix::Identity(2, 2), Matrix::Identity(2, 2)};
  const Vector z{{1.0, 1.0}};
  const auto a = particle_fusion_posterior(priors, w, model, z, 2000, 11);
  const auto b = particle_fusion_posterior(priors, w, model, z, 2000, 11);
  EXPECT_EQ(a.particles, b.particles);
  EXPECT_THROW(particle_fusion_posterior(priors, w, model, z, 999, 11), ValidationError);
}

TEST(ParticleFusion, DegenerateWeightsThrow) {
  const std::vector<GaussianBelief> priors{GaussianBelief::isotropic(1, 1.0)};
  const LinearGaussianModel sharp{Matrix::Ones(1, 1), Matrix::Constant(1, 1, 1e12)};
  EXPECT_THROW(particle_fusion_posterior(priors, std::vector<double>{1.0}, sharp, Vector{{9.0}},
                                         1000, 1),
               NumericalError);
}

TEST(ParticleFusion, ErrorDecaysWithParticleCount) {
  const auto priors = unit_circle_priors();
  const std::vector<double> w(4, 0.25);
  const LinearGaussianModel model{Matrix::Identity(2, 2), Matrix::Identity(2, 2)};
  const Vector z{{1.0, 1.0}};
  const Vector truth{{0.5, 0.5}};
  std::vector<double> medians;
  for (int n : {1000, 10000, 100000}) {
    std::vector<double> errs;
    for (int s = 0; s < 20; ++s) {
      errs.push_back(
          (particle_fusion_posterior(priors, w, model, z, n, 1000 + s).fitted.mean() - truth).norm());
    }
    std::nth_element(errs.begin(), errs.begin() + 10, errs.end());
    medians.push_back(errs[10]);
  }
  EXPECT_GT(medians[0], medians[1]);
  EXPECT_GT(medians[1], medians[2]);
}

TEST(Quadrature, Examples) {
  EXPECT_NEAR(quadrature_probit_moments(0.0, 2.0, 0.61).first, 0.5, 1e-12);
  const auto [a, b] = quadrature_probit_moments(0.8, 0.0, 0.61);
  EXPECT_DOUBLE_EQ(a, testutil::std_normal_cdf(0.61 * 0.8));
  EXPECT_DOUBLE_EQ(b, 0.61 * std::exp(-0.5 * 0.61 * 0.61 * 0.64) / std::sqrt(2 * std::numbers::pi));
}

TEST(Quadrature, ClosedFormsAndRefinementStability) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> mean(0.0, 3.0);
  std::uniform_real_distribution<double> var(0.0, 20.0);
  for (int t = 0; t < 200; ++t) {
    const double m = mean(rng), v = var(rng);
    const auto cf = probit_closed_forms(m, v, 0.61);
    const auto q = quadrature_probit_moments(m, v, 0.61);
    EXPECT_NEAR(cf.first, q.first, 1e-9);
    EXPECT_NEAR(cf.second, q.second, 1e-9);
    const auto loose = quadrature_probit_moments(m, v, 0.61, 1e-11);
    EXPECT_NEAR(loose.first, q.first, 1e-9);
    EXPECT_NEAR(loose.second, q.second, 1e-9);
    EXPECT_GT(q.first, 0.0);
    EXPECT_LT(q.first, 1.0);
  }
}

TEST(MonteCarlo, SaturatedAndSymmetricCases) {
  const Vector phi{{0.6, 0.8}};
  const GaussianBelief sat(50.0 * phi, 100.0 * Matrix::Identity(2, 2));
  const auto g = mc_expected_gradient(sat, phi, 1, 10000, 1);
  EXPECT_LE(g.mean.cwiseAbs().maxCoeff(), 1e-12);

  const GaussianBelief zero = GaussianBelief::isotropic(2, 1.0);
  for (int y : {0, 1}) {
    const auto r = mc_expected_gradient(zero, phi, y, 200000, 2 + y);
    for (int k = 0; k < 2; ++k) {
      EXPECT_NEAR(r.mean(k), (y - 0.5) * phi(k), 3.0 * r.standard_error(k) + 1e-12);
    }
  }
  EXPECT_THROW(mc_expected_gradient(zero, phi, 1, 100, 1), ValidationError);
}

TEST(MonteCarlo, ExpectedSigmoidAgainstLogisticLoop) {
  std::mt19937_64 rng(5);
  const GaussianBelief b(testutil::random_vector(2, rng), testutil::random_spd(2, rng));
  const Vector phi = testutil::random_vector(2, rng);
  const auto est = mc_expected_sigmoid(b, phi, 200000, 9);
  // 1-D reference: u ~ N(phi^T mu, phi^T Sigma phi), trapezoid rule.
  const double m = phi.dot(b.mean());
  const double s = std::sqrt(phi.dot(b.covariance() * phi));
  double ref = 0.0;
  const double h = 1e-3;
  for (double t = -10.0; t <= 10.0; t += h) {
    ref += testutil::logistic(m + s * t) * std::exp(-0.5 * t * t) / std::sqrt(2 * std::numbers::pi) * h;
  }
  EXPECT_NEAR(est.value, ref, 4.0 * est.standard_error);
  EXPECT_NEAR(expected_sigmoid(b, phi), ref, 0.02);
}
