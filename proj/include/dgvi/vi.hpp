#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dgvi/belief.hpp"
#include "dgvi/data.hpp"
#include "dgvi/features.hpp"

namespace dgvi {

/// Probit constant matching the logistic sigmoid, sigma(u) ~ Gamma(xi u).
inline constexpr double kDefaultXi = 0.61;

/// Which inverse information scales the mean innovation.
enum class MeanUpdateMatrix {
  posterior_information,   ///< Omega_{t+1}^-1 (gradient-step derivation)
  fused_prior_information  ///< (Omega^g)^-1
};

MeanUpdateMatrix parse_mean_update_matrix(const std::string& s);
std::string to_string(MeanUpdateMatrix m);

struct UpdateOptions {
  double xi = kDefaultXi;
  MeanUpdateMatrix mean_update_matrix = MeanUpdateMatrix::posterior_information;
  /// Multiplies the expected log-likelihood gradient and Hessian.
  double likelihood_weight = 1.0;

  void validate() const;
};

struct ClassificationObservation {
  Eigen::VectorXd x;
  int y = 0;
};

/// m stacked outputs: y_k = Phi(x_k)^T theta + noise, noise precision S (m x m).
struct RegressionObservation {
  std::vector<Eigen::VectorXd> x;
  Eigen::VectorXd y;
  Eigen::MatrixXd precision;
};

/// Standard normal CDF.
double probit(double u);
/// Standard normal density.
double normal_pdf(double u);

/// Closed-form Gaussian expectations of the probit surrogate for u ~ N(mean_u, var_u):
/// first = E[Gamma(xi u)] = Gamma(xi m / sqrt(beta)),
/// second = E[xi phi(xi u)] = sqrt(xi^2 / (2 pi beta)) exp(-xi^2 m^2 / (2 beta)),
/// with beta = 1 + xi^2 var_u.
std::pair<double, double> probit_closed_forms(double mean_u, double var_u, double xi);

/// E_q[Gamma(xi phi^T theta)]; also the predictive occupancy probability.
double expected_sigmoid(const GaussianBelief& belief, const Eigen::VectorXd& phi,
                        double xi = kDefaultXi);
double expected_sigmoid(const DiagGaussianBelief& belief, const Eigen::VectorXd& phi,
                        double xi = kDefaultXi);

/// (y - expected_sigmoid) * phi
Eigen::VectorXd expected_loglik_gradient(const GaussianBelief& belief, const Eigen::VectorXd& phi,
                                         int y, double xi = kDefaultXi);

/// gamma >= 0 such that the expected log-likelihood Hessian is -gamma phi phi^T.
double hessian_scale(const GaussianBelief& belief, const Eigen::VectorXd& phi,
                     double xi = kDefaultXi);
double hessian_scale(const DiagGaussianBelief& belief, const Eigen::VectorXd& phi,
                     double xi = kDefaultXi);

/// One Gaussian VI step for a single labeled feature vector, taking `prior` as
/// the (already fused) prior. Information grows by gamma phi phi^T; the
/// covariance cache is carried forward with the rank-1 inverse update.
GaussianBelief gvi_classify_update(const GaussianBelief& prior, const Eigen::VectorXd& phi, int y,
                                   const UpdateOptions& opts = {});

/// Diagonal-information variant: D grows by gamma * (phi .* phi).
DiagGaussianBelief diag_gvi_classify_update(const DiagGaussianBelief& prior,
                                            const Eigen::VectorXd& phi, int y,
                                            const UpdateOptions& opts = {});

/// Exact conjugate update for the linear-Gaussian model with feature block
/// `phi` (dim x m), targets y (m) and noise precision S (m x m).
GaussianBelief gvi_regression_update(const GaussianBelief& prior, const Eigen::MatrixXd& phi,
                                     const Eigen::VectorXd& y, const Eigen::MatrixXd& precision,
                                     const UpdateOptions& opts = {});

/// Distributed steps: geometric fusion of own + neighbor beliefs with a row of
/// the weight matrix, then the local update above.
GaussianBelief dgvi_classify_step(std::span<const GaussianBelief> beliefs,
                                  std::span<const double> weights, const Eigen::VectorXd& phi,
                                  int y, const UpdateOptions& opts = {});
GaussianBelief dgvi_classify_step(std::span<const GaussianBelief> beliefs,
                                  std::span<const double> weights,
                                  const ClassificationObservation& obs, const KernelModel& model,
                                  const UpdateOptions& opts = {});

DiagGaussianBelief diag_dgvi_classify_step(std::span<const DiagGaussianBelief> beliefs,
                                           std::span<const double> weights,
                                           const Eigen::VectorXd& phi, int y,
                                           const UpdateOptions& opts = {});
DiagGaussianBelief diag_dgvi_classify_step(std::span<const DiagGaussianBelief> beliefs,
                                           std::span<const double> weights,
                                           const ClassificationObservation& obs,
                                           const KernelModel& model,
                                           const UpdateOptions& opts = {});

GaussianBelief dgvi_regression_step(std::span<const GaussianBelief> beliefs,
                                    std::span<const double> weights, const Eigen::MatrixXd& phi,
                                    const Eigen::VectorXd& y, const Eigen::MatrixXd& precision,
                                    const UpdateOptions& opts = {});
GaussianBelief dgvi_regression_step(std::span<const GaussianBelief> beliefs,
                                    std::span<const double> weights,
                                    const RegressionObservation& obs, const KernelModel& model,
                                    const UpdateOptions& opts = {});

/// Feature block [Phi(x_1) ... Phi(x_m)].
Eigen::MatrixXd feature_block(const KernelModel& model, std::span<const Eigen::VectorXd> xs);

/// expected_sigmoid at each row of `points` (n x d).
std::vector<double> predict_batch(const GaussianBelief& belief, const KernelModel& model,
                                  const Eigen::MatrixXd& points, double xi = kDefaultXi);
std::vector<double> predict_batch(const DiagGaussianBelief& belief, const KernelModel& model,
                                  const Eigen::MatrixXd& points, double xi = kDefaultXi);

/// Linear predictor Phi(x)^T mu at each row (regression mean).
std::vector<double> predict_mean_batch(const Eigen::VectorXd& mean, const KernelModel& model,
                                       const Eigen::MatrixXd& points);

/// Rows of a point list as an n x 2 matrix.
Eigen::MatrixXd points_matrix(std::span<const LabeledPoint> points);

}  // namespace dgvi
