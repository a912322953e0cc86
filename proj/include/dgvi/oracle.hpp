#pragma once

#include <cstdint>
#include <span>
#include <utility>

#include "dgvi/belief.hpp"

namespace dgvi {

/// z = H theta + noise, noise precision obs_precision.
struct LinearGaussianModel {
  Matrix h;
  Matrix obs_precision;
};

/// Closed-form posterior of the geometric mixture of `priors` under a linear-
/// Gaussian likelihood. Computed directly from the normal equations; it does not
/// reuse the fusion routines it is used to check.
GaussianBelief conjugate_fusion_posterior(std::span<const GaussianBelief> priors,
                                          std::span<const double> weights,
                                          const LinearGaussianModel& model, const Vector& z);

struct ParticleFusionResult {
  Matrix particles;  ///< n_particles x dim, after stratified resampling
  GaussianBelief fitted;
  double effective_sample_size;
};

/// Importance sampling of the same posterior. Proposal: equal-weight mixture of
/// the priors. Target: likelihood times prod_j q_j^{w_j}. Stratified resampling,
/// then a moment-matched Gaussian fit. Throws NumericalError when the effective
/// sample size falls below 10.
ParticleFusionResult particle_fusion_posterior(std::span<const GaussianBelief> priors,
                                               std::span<const double> weights,
                                               const LinearGaussianModel& model, const Vector& z,
                                               int n_particles, std::uint64_t seed);

/// (E[Gamma(xi u)], E[xi phi(xi u)]) for u ~ N(mean_u, var_u) by adaptive
/// Gauss-Kronrod quadrature.
std::pair<double, double> quadrature_probit_moments(double mean_u, double var_u, double xi,
                                                    double tolerance = 1e-13);

struct MonteCarloEstimate {
  double value;
  double standard_error;
};

struct MonteCarloGradient {
  Vector mean;
  Vector standard_error;
};

/// E_q[sigma(phi^T theta)] with the logistic sigmoid, from full parameter draws.
MonteCarloEstimate mc_expected_sigmoid(const GaussianBelief& belief, const Vector& phi,
                                       int n_samples, std::uint64_t seed);

/// E_q[(y - sigma(phi^T theta)) phi] with the logistic sigmoid.
MonteCarloGradient mc_expected_gradient(const GaussianBelief& belief, const Vector& phi, int y,
                                        int n_samples, std::uint64_t seed);

}  // namespace dgvi
