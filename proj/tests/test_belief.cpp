#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "dgvi/belief.hpp"
#include "dgvi/errors.hpp"
#include "test_util.hpp"

using namespace dgvi;
using testutil::max_abs;

namespace {

// Moment-match the normalized prod_j N(x | m_j, 1/w_j)^{a_j} on a fine grid.
std::pair<double, double> grid_fusion_1d(const std::vector<double>& infos,
                                         const std::vector<double>& means,
                                         const std::vector<double>& weights) {
  const double lo = -30.0, hi = 30.0, h = 1e-4;
  double z = 0.0, m1 = 0.0, m2 = 0.0;
  for (double x = lo; x <= hi; x += h) {
    double logp = 0.0;
    for (std::size_t j = 0; j < infos.size(); ++j) {
      logp += weights[j] * (-0.5 * infos[j] * (x - means[j]) * (x - means[j]) +
                            0.5 * std::log(infos[j] / (2.0 * std::numbers::pi)));
    }
    const double p = std::exp(logp);
    z += p;
    m1 += p * x;
    m2 += p * x * x;
  }
  const double mean = m1 / z;
  const double var = m2 / z - mean * mean;
  return {1.0 / var, mean};
}

}  // namespace

TEST(GaussianBelief, RejectsAsymmetricAndIndefinite) {
  Matrix asym(2, 2);
  asym << 2.0, 0.5, 0.4, 2.0;
  EXPECT_THROW(GaussianBelief(Vector::Zero(2), asym), ValidationError);
  Matrix indef(2, 2);
  indef << 1.0, 2.0, 2.0, 1.0;
  EXPECT_THROW(GaussianBelief(Vector::Zero(2), indef), NumericalError);
  EXPECT_THROW(GaussianBelief(Vector::Zero(3), Matrix::Identity(2, 2)), ValidationError);
}

TEST(GaussianBelief, RejectsInconsistentCovarianceCache) {
  EXPECT_THROW(GaussianBelief(Vector::Zero(2), Matrix::Identity(2, 2), 2.0 * Matrix::Identity(2, 2)),
               ValidationError);
  const GaussianBelief ok(Vector::Zero(2), 2.0 * Matrix::Identity(2, 2),
                          0.5 * Matrix::Identity(2, 2));
  EXPECT_TRUE(ok.has_covariance());
}

TEST(GaussianBelief, CovarianceIsInverseOfInformation) {
  std::mt19937_64 rng(3);
  const Matrix info = testutil::random_spd(6, rng);
  const GaussianBelief b(testutil::random_vector(6, rng), info);
  EXPECT_FALSE(b.has_covariance());
  EXPECT_LE(max_abs(info * b.covariance(), Matrix::Identity(6, 6)), 1e-10);
  EXPECT_TRUE(b.with_covariance().has_covariance());
  EXPECT_LE(max_abs(b.information_mean(), info * b.mean()), 1e-12);
}

TEST(DiagGaussianBelief, RequiresPositiveInformation) {
  EXPECT_THROW(DiagGaussianBelief(Vector::Zero(2), Vector{{1.0, 0.0}}), NumericalError);
  EXPECT_THROW(DiagGaussianBelief(Vector::Zero(2), Vector{{1.0, -1.0}}), NumericalError);
  const DiagGaussianBelief b(Vector::Zero(2), Vector{{2.0, 4.0}});
  EXPECT_DOUBLE_EQ(b.variance()(1), 0.25);
}

TEST(GeometricFuse, SingleBeliefWeightOneIsIdentity) {
  std::mt19937_64 rng(1);
  const GaussianBelief b(testutil::random_vector(4, rng), testutil::random_spd(4, rng));
  const std::vector<GaussianBelief> v{b};
  const std::vector<double> w{1.0};
  const auto out = geometric_fuse(v, w);
  EXPECT_EQ(out.mean(), b.mean());
  EXPECT_EQ(out.information(), b.information());
}

TEST(GeometricFuse, OneDimensionalPairMatchesGridIntegration) {
  const std::vector<GaussianBelief> v{GaussianBelief(Vector{{0.0}}, Matrix::Constant(1, 1, 1.0)),
                                      GaussianBelief(Vector{{4.0}}, Matrix::Constant(1, 1, 3.0))};
  const std::vector<double> w{0.5, 0.5};
  const auto out = geometric_fuse(v, w);
  const auto [info, mean] = grid_fusion_1d({1.0, 3.0}, {0.0, 4.0}, w);
  EXPECT_NEAR(out.information()(0, 0), info, 1e-6);
  EXPECT_NEAR(out.mean()(0), mean, 1e-6);
  EXPECT_NEAR(out.information()(0, 0), 2.0, 1e-15);
  EXPECT_NEAR(out.mean()(0), 3.0, 1e-15);
}

TEST(GeometricFuse, DiagonalOneDimensionalPairMatchesGridIntegration) {
  const std::vector<DiagGaussianBelief> v{DiagGaussianBelief(Vector{{0.0}}, Vector{{1.0}}),
                                          DiagGaussianBelief(Vector{{4.0}}, Vector{{3.0}})};
  const std::vector<double> w{0.5, 0.5};
  const auto out = geometric_fuse_diag(v, w);
  const auto [info, mean] = grid_fusion_1d({1.0, 3.0}, {0.0, 4.0}, w);
  EXPECT_NEAR(out.info_diag()(0), info, 1e-6);
  EXPECT_NEAR(out.mean()(0), mean, 1e-6);
}

TEST(GeometricFuse, IdenticalBeliefsUnchanged) {
  std::mt19937_64 rng(5);
  const GaussianBelief b(testutil::random_vector(5, rng), testutil::random_spd(5, rng));
  const std::vector<GaussianBelief> v(4, b);
  const std::vector<double> w(4, 0.25);
  const auto out = geometric_fuse(v, w);
  EXPECT_LE(max_abs(out.mean(), b.mean()), 1e-12);
  EXPECT_LE(max_abs(out.information(), b.information()), 1e-12);

  const DiagGaussianBelief d(testutil::random_vector(5, rng), Vector::Constant(5, 2.5));
  const std::vector<DiagGaussianBelief> dv(3, d);
  const std::vector<double> dw(3, 1.0 / 3.0);
  const auto dout = geometric_fuse_diag(dv, dw);
  EXPECT_LE(max_abs(dout.mean(), d.mean()), 1e-12);
  EXPECT_LE(max_abs(dout.info_diag(), d.info_diag()), 1e-12);
}

TEST(GeometricFuse, InformationIsExactWeightedSumAndPermutationInvariant) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<GaussianBelief> v;
    std::vector<double> w;
    for (int j = 0; j < 4; ++j) {
      v.emplace_back(testutil::random_vector(5, rng), testutil::random_spd(5, rng));
      w.push_back(std::uniform_real_distribution<double>(0.1, 1.0)(rng));
    }
    const double s = std::accumulate(w.begin(), w.end(), 0.0);
    for (auto& x : w) x /= s;
    const auto out = geometric_fuse(v, w);
    Matrix sum = Matrix::Zero(5, 5);
    Vector eta = Vector::Zero(5);
    for (int j = 0; j < 4; ++j) {
      sum += w[j] * v[j].information();
      eta += w[j] * v[j].information() * v[j].mean();
    }
    EXPECT_LE(max_abs(out.information(), sum), 1e-14);
    EXPECT_LE(max_abs(out.information() * out.mean(), eta), 1e-10);

    std::vector<int> perm{2, 0, 3, 1};
    std::vector<GaussianBelief> pv;
    std::vector<double> pw;
    for (int k : perm) {
      pv.push_back(v[k]);
      pw.push_back(w[k]);
    }
    const auto pout = geometric_fuse(pv, pw);
    EXPECT_LE(max_abs(pout.mean(), out.mean()), 1e-12);
    EXPECT_LE(max_abs(pout.information(), out.information()), 1e-12);
  }
}

TEST(GeometricFuse, Errors) {
  const std::vector<GaussianBelief> v{GaussianBelief::isotropic(2, 1.0),
                                      GaussianBelief::isotropic(3, 1.0)};
  EXPECT_THROW(geometric_fuse(v, std::vector<double>{0.5, 0.5}), ValidationError);
  const std::vector<GaussianBelief> same(2, GaussianBelief::isotropic(2, 1.0));
  EXPECT_THROW(geometric_fuse(same, std::vector<double>{0.5, 0.6}), ValidationError);
  EXPECT_THROW(geometric_fuse(same, std::vector<double>{1.0}), ValidationError);
  EXPECT_THROW(geometric_fuse(same, std::vector<double>{1.5, -0.5}), ValidationError);
}

TEST(Rank1InverseUpdate, GammaZeroIsNoOp) {
  std::mt19937_64 rng(2);
  const Matrix sigma = testutil::random_spd(5, rng);
  const Matrix out = rank1_inverse_update(sigma, testutil::random_vector(5, rng), 0.0);
  EXPECT_EQ(out, sigma);
}

TEST(Rank1InverseUpdate, ScalarCase) {
  const Matrix out = rank1_inverse_update(Matrix::Constant(1, 1, 0.5), Vector::Ones(1), 1.0);
  EXPECT_NEAR(out(0, 0), 1.0 / 3.0, 1e-15);
}

TEST(Rank1InverseUpdate, MatchesDenseInverse50) {
  std::mt19937_64 rng(50);
  const Matrix sigma = testutil::random_spd(50, rng);
  const Vector phi = testutil::random_vector(50, rng);
  const Matrix out = rank1_inverse_update(sigma, phi, 0.7);
  const Matrix dense = (Matrix(sigma.inverse()) + 0.7 * phi * phi.transpose()).inverse();
  EXPECT_LE(max_abs(out, dense), 1e-8);
  EXPECT_EQ(out, out.transpose());
}

TEST(Rank1InverseUpdate, ComposedWithDenseInversionIsIdentity) {
  std::mt19937_64 rng(77);
  for (int n : {1, 3, 17, 80, 200}) {
    const Matrix sigma = testutil::random_spd(n, rng);
    const Vector phi = testutil::random_vector(n, rng);
    const double gamma = std::uniform_real_distribution<double>(0.0, 2.0)(rng);
    const Matrix out = rank1_inverse_update(sigma, phi, gamma);
    const Matrix info = Matrix(sigma.inverse()) + gamma * phi * phi.transpose();
    EXPECT_LE(max_abs(out * info, Matrix::Identity(n, n)), 1e-8) << "n = " << n;
  }
}

TEST(Rank1InverseUpdate, NonPositiveScalarThrows) {
  Matrix bad(2, 2);
  bad << -1.0, 0.0, 0.0, -1.0;
  EXPECT_THROW(rank1_inverse_update(bad, Vector::Ones(2), 1.0), NumericalError);
  EXPECT_THROW(rank1_inverse_update(Matrix::Identity(2, 2), Vector::Ones(2), -1.0),
               ValidationError);
}

TEST(LowRankInverseUpdate, MatchesDenseInverse) {
  std::mt19937_64 rng(9);
  const Matrix sigma = testutil::random_spd(12, rng);
  Matrix phi(12, 3);
  for (auto& v : phi.reshaped()) v = std::normal_distribution<double>()(rng);
  const Matrix s = testutil::random_spd(3, rng);
  const Matrix dense = (Matrix(sigma.inverse()) + phi * s * phi.transpose()).inverse();
  EXPECT_LE(max_abs(low_rank_inverse_update(sigma, phi, s), dense), 1e-10);
}

TEST(KlGaussian, SelfIsZero) {
  std::mt19937_64 rng(4);
  const GaussianBelief p(testutil::random_vector(4, rng), testutil::random_spd(4, rng));
  EXPECT_NEAR(kl_gaussian(p, p), 0.0, 1e-12);
}

TEST(KlGaussian, UnitShift) {
  const GaussianBelief p(Vector{{0.0}}, Matrix::Identity(1, 1));
  const GaussianBelief q(Vector{{1.0}}, Matrix::Identity(1, 1));
  EXPECT_NEAR(kl_gaussian(p, q), 0.5, 1e-14);
}

TEST(KlGaussian, MatchesMonteCarlo) {
  std::mt19937_64 rng(8);
  const GaussianBelief p(testutil::random_vector(3, rng), testutil::random_spd(3, rng));
  const GaussianBelief q(testutil::random_vector(3, rng), testutil::random_spd(3, rng));
  const int n = 1000000;
  const Matrix draws = sample_gaussian(p, n, 123);
  const Matrix cov_p = p.information().inverse();
  const Matrix cov_q = q.information().inverse();
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const Vector x = draws.row(i).transpose();
    const double d = testutil::log_density(x, p.mean(), cov_p) -
                     testutil::log_density(x, q.mean(), cov_q);
    sum += d;
    sum2 += d * d;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sum2 / n - mean * mean) / n);
  EXPECT_NEAR(kl_gaussian(p, q), mean, 3.0 * se);
}

TEST(KlGaussian, NonNegativeOnRandomPairs) {
  std::mt19937_64 rng(10);
  for (int t = 0; t < 1000; ++t) {
    const int n = 1 + static_cast<int>(rng() % 6);
    const GaussianBelief p(testutil::random_vector(n, rng), testutil::random_spd(n, rng));
    const GaussianBelief q(testutil::random_vector(n, rng), testutil::random_spd(n, rng));
    EXPECT_GT(kl_gaussian(p, q), 0.0);
  }
  EXPECT_THROW(kl_gaussian(GaussianBelief::isotropic(2, 1.0), GaussianBelief::isotropic(3, 1.0)),
               ValidationError);
}

TEST(SampleGaussian, DeterministicAndShaped) {
  std::mt19937_64 rng(6);
  const GaussianBelief b(testutil::random_vector(3, rng), testutil::random_spd(3, rng));
  EXPECT_EQ(sample_gaussian(b, 100, 9), sample_gaussian(b, 100, 9));
  const Matrix one = sample_gaussian(b, 1, 9);
  EXPECT_EQ(one.rows(), 1);
  EXPECT_EQ(one.cols(), 3);
}

TEST(SampleGaussian, UnitGaussianMoments) {
  const int n = 1000000;
  const Matrix d = sample_gaussian(GaussianBelief::isotropic(2, 1.0), n, 42);
  const Vector mean = d.colwise().mean().transpose();
  EXPECT_LE(mean.cwiseAbs().maxCoeff(), 3.0 / std::sqrt(static_cast<double>(n)));
  const Matrix centered = d.rowwise() - mean.transpose();
  const Matrix cov = centered.transpose() * centered / (n - 1.0);
  EXPECT_LE(max_abs(cov, Matrix::Identity(2, 2)), 0.01);
}

TEST(SampleGaussian, CorrelatedCovarianceConverges) {
  std::mt19937_64 rng(12);
  const GaussianBelief b(testutil::random_vector(3, rng), testutil::random_spd(3, rng, 0.5, 2.0));
  const int n = 400000;
  const Matrix d = sample_gaussian(b, n, 7);
  const Vector mean = d.colwise().mean().transpose();
  const Matrix centered = d.rowwise() - mean.transpose();
  const Matrix cov = centered.transpose() * centered / (n - 1.0);
  EXPECT_LE(max_abs(mean, b.mean()), 0.02);
  EXPECT_LE(max_abs(cov, b.covariance()), 0.03);
}
