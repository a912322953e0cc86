#include "dgvi/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "dgvi/errors.hpp"

namespace dgvi {
namespace {

constexpr int kSampleChunk = 100000;

void validate_model(const LinearGaussianModel& model, Eigen::Index dim, Eigen::Index z_dim) {
  if (model.h.cols() != dim || model.h.rows() != z_dim || model.obs_precision.rows() != z_dim ||
      model.obs_precision.cols() != z_dim) {
    throw ValidationError("linear-Gaussian model: dimension mismatch");
  }
  Eigen::LLT<Matrix> llt(model.obs_precision);
  if (llt.info() != Eigen::Success) {
    throw ValidationError("linear-Gaussian model: observation precision is not positive definite");
  }
}

void validate_priors(std::span<const GaussianBelief> priors, std::span<const double> weights) {
  if (priors.empty()) throw ValidationError("oracle: no priors");
  if (priors.size() != weights.size()) throw ValidationError("oracle: weight count mismatch");
  for (const auto& p : priors) {
    if (p.dim() != priors.front().dim()) throw ValidationError("oracle: prior dimensions differ");
  }
}

// Log density of N(mean, information^-1) at each column of `x`, using a
// precomputed Cholesky factor of the information.
Eigen::VectorXd log_density(const Eigen::LLT<Matrix>& llt, const Vector& mean, const Matrix& x) {
  const Eigen::Index dim = mean.size();
  const Matrix lower = llt.matrixL();
  const double logdet = 2.0 * lower.diagonal().array().log().sum();
  // |L^T (x - mu)|^2 = (x - mu)^T Omega (x - mu)
  const Matrix centered = x.colwise() - mean;
  const Matrix proj = lower.transpose() * centered;
  const Eigen::VectorXd quad = proj.colwise().squaredNorm().transpose();
  return (-0.5 * quad).array() + 0.5 * logdet -
         0.5 * static_cast<double>(dim) * std::log(2.0 * std::numbers::pi);
}

double logistic(double u) {
  return u >= 0 ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u) / (1.0 + std::exp(u));
}

std::uint64_t chunk_seed(std::uint64_t seed, std::uint64_t chunk) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(chunk)};
  std::uint64_t out = 0;
  std::vector<std::uint32_t> words(2);
  seq.generate(words.begin(), words.end());
  out = (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
  return out;
}

// Projections phi^T theta for n_samples draws of theta from the belief.
std::vector<double> sample_projections(const GaussianBelief& belief, const Vector& phi,
                                       int n_samples, std::uint64_t seed) {
  if (phi.size() != belief.dim()) throw ValidationError("Monte Carlo: dimension mismatch");
  if (n_samples < 2) throw ValidationError("Monte Carlo: need at least 2 samples");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n_samples));
  std::uint64_t chunk = 0;
  for (int done = 0; done < n_samples; done += kSampleChunk, ++chunk) {
    const int count = std::min(kSampleChunk, n_samples - done);
    const Matrix draws = sample_gaussian(belief, count, chunk_seed(seed, chunk));
    const Eigen::VectorXd u = draws * phi;
    out.insert(out.end(), u.data(), u.data() + u.size());
  }
  return out;
}

}  // namespace

GaussianBelief conjugate_fusion_posterior(std::span<const GaussianBelief> priors,
                                          std::span<const double> weights,
                                          const LinearGaussianModel& model, const Vector& z) {
  validate_priors(priors, weights);
  const Eigen::Index dim = priors.front().dim();
  validate_model(model, dim, z.size());
  Matrix information = model.h.transpose() * model.obs_precision * model.h;
  Vector rhs = model.h.transpose() * (model.obs_precision * z);
  for (std::size_t j = 0; j < priors.size(); ++j) {
    information += weights[j] * priors[j].information();
    rhs += weights[j] * (priors[j].information() * priors[j].mean());
  }
  information = symmetrize(information);
  Eigen::LDLT<Matrix> ldlt(information);
  if (ldlt.info() != Eigen::Success) {
    throw NumericalError("conjugate posterior information is singular");
  }
  Vector mean = ldlt.solve(rhs);
  return GaussianBelief(std::move(mean), std::move(information));
}

ParticleFusionResult particle_fusion_posterior(std::span<const GaussianBelief> priors,
                                               std::span<const double> weights,
                                               const LinearGaussianModel& model, const Vector& z,
                                               int n_particles, std::uint64_t seed) {
  validate_priors(priors, weights);
  const Eigen::Index dim = priors.front().dim();
  validate_model(model, dim, z.size());
  if (n_particles < 1000) throw ValidationError("particle fusion: need at least 1000 particles");

  const std::size_t n_comp = priors.size();
  std::vector<Eigen::LLT<Matrix>> factors;
  factors.reserve(n_comp);
  for (const auto& p : priors) {
    factors.emplace_back(p.information());
    if (factors.back().info() != Eigen::Success) {
      throw NumericalError("particle fusion: prior information is not positive definite");
    }
  }

  // Proposal draws: uniform component, then a Gaussian draw from it.
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n_comp - 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix theta(dim, n_particles);
  for (int i = 0; i < n_particles; ++i) {
    const std::size_t c = pick(rng);
    Vector eps(dim);
    for (Eigen::Index k = 0; k < dim; ++k) eps[k] = normal(rng);
    theta.col(i) = priors[c].mean() + factors[c].matrixU().solve(eps);
  }

  // log q_j(theta_i) for every component.
  Matrix log_q(n_comp, n_particles);
  for (std::size_t j = 0; j < n_comp; ++j) {
    log_q.row(static_cast<Eigen::Index>(j)) =
        log_density(factors[j], priors[j].mean(), theta).transpose();
  }
  const Matrix residual = (model.h * theta).colwise() - z;
  const Eigen::VectorXd log_lik =
      -0.5 * (residual.array() * (model.obs_precision * residual).array()).colwise().sum().transpose();

  Eigen::VectorXd log_w(n_particles);
  const double log_mix = std::log(static_cast<double>(n_comp));
  for (int i = 0; i < n_particles; ++i) {
    double target = log_lik[i];
    for (std::size_t j = 0; j < n_comp; ++j) target += weights[j] * log_q(static_cast<Eigen::Index>(j), i);
    const double top = log_q.col(i).maxCoeff();
    const double proposal = top + std::log((log_q.col(i).array() - top).exp().sum()) - log_mix;
    log_w[i] = target - proposal;
  }
  const double top = log_w.maxCoeff();
  Eigen::VectorXd w = (log_w.array() - top).exp();
  w /= w.sum();
  const double ess = 1.0 / w.squaredNorm();
  if (ess < 10.0) {
    throw NumericalError("particle fusion: effective sample size " + std::to_string(ess) +
                         " below 10");
  }

  // Stratified resampling: one uniform draw inside each of N equal strata.
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix particles(n_particles, dim);
  double cumulative = w[0];
  int src = 0;
  for (int i = 0; i < n_particles; ++i) {
    const double u = (static_cast<double>(i) + unit(rng)) / n_particles;
    while (u > cumulative && src < n_particles - 1) cumulative += w[++src];
    particles.row(i) = theta.col(src).transpose();
  }

  const Vector mean = particles.colwise().mean().transpose();
  const Matrix centered = particles.rowwise() - mean.transpose();
  const Matrix cov = symmetrize(centered.transpose() * centered / (n_particles - 1.0));
  Eigen::LLT<Matrix> cov_llt(cov);
  if (cov_llt.info() != Eigen::Success) {
    throw NumericalError("particle fusion: resampled particles are degenerate");
  }
  Matrix information = symmetrize(cov_llt.solve(Matrix::Identity(dim, dim)));
  return {std::move(particles),
          GaussianBelief(GaussianBelief::Trusted{}, mean, std::move(information), cov), ess};
}

std::pair<double, double> quadrature_probit_moments(double mean_u, double var_u, double xi,
                                                    double tolerance) {
  if (!(var_u >= 0.0)) throw ValidationError("quadrature: variance must be nonnegative");
  auto gamma = [](double u) { return 0.5 * std::erfc(-u / std::numbers::sqrt2); };
  auto pdf = [](double u) { return std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi); };
  if (var_u == 0.0) return {gamma(xi * mean_u), xi * pdf(xi * mean_u)};

  // Integrate over the standardized variable t, u = mean_u + sd t. Beyond
  // |t| = 12 the Gaussian weight is below 1e-32.
  const double sd = std::sqrt(var_u);
  auto first = [&](double t) { return gamma(xi * (mean_u + sd * t)) * pdf(t); };
  auto second = [&](double t) { return xi * pdf(xi * (mean_u + sd * t)) * pdf(t); };

  std::vector<double> breaks{-12.0, 12.0};
  const double peak = -mean_u / sd;
  if (peak > -12.0 && peak < 12.0) breaks.insert(breaks.begin() + 1, peak);

  using Rule = boost::math::quadrature::gauss_kronrod<double, 61>;
  double e1 = 0.0;
  double e2 = 0.0;
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
    e1 += Rule::integrate(first, breaks[k], breaks[k + 1], 30, tolerance);
    e2 += Rule::integrate(second, breaks[k], breaks[k + 1], 30, tolerance);
  }
  return {e1, e2};
}

MonteCarloEstimate mc_expected_sigmoid(const GaussianBelief& belief, const Vector& phi,
                                       int n_samples, std::uint64_t seed) {
  const auto u = sample_projections(belief, phi, n_samples, seed);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (double v : u) {
    const double s = logistic(v);
    sum += s;
    sum_sq += s * s;
  }
  const double n = static_cast<double>(u.size());
  const double mean = sum / n;
  const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
  return {mean, std::sqrt(var / n)};
}

MonteCarloGradient mc_expected_gradient(const GaussianBelief& belief, const Vector& phi, int y,
                                        int n_samples, std::uint64_t seed) {
  if (y != 0 && y != 1) throw ValidationError("Monte Carlo: label must be 0 or 1");
  if (n_samples < 10000) throw ValidationError("Monte Carlo gradient: need at least 1e4 samples");
  const auto s = mc_expected_sigmoid(belief, phi, n_samples, seed);
  // Every sample of the gradient is the scalar (y - sigma) times phi.
  const double scalar = static_cast<double>(y) - s.value;
  return {scalar * phi, s.standard_error * phi.cwiseAbs()};
}

}  // namespace dgvi
