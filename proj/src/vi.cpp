#include "dgvi/vi.hpp"

#include <cmath>
#include <numbers>

#include "dgvi/errors.hpp"

namespace dgvi {
namespace {

void check_phi(Eigen::Index dim, const Eigen::VectorXd& phi) {
  if (phi.size() != dim) {
    throw ValidationError("feature vector has length " + std::to_string(phi.size()) +
                          ", belief has dimension " + std::to_string(dim));
  }
}

void check_label(int y) {
  if (y != 0 && y != 1) throw ValidationError("classification label must be 0 or 1");
}

// Probit moments for one feature vector.
struct Projection {
  double mean_u;  // phi^T mu
  double var_u;   // phi^T Sigma phi
};

}  // namespace

MeanUpdateMatrix parse_mean_update_matrix(const std::string& s) {
  if (s == "posterior_information") return MeanUpdateMatrix::posterior_information;
  if (s == "fused_prior_information") return MeanUpdateMatrix::fused_prior_information;
  throw ValidationError("unknown mean_update_matrix '" + s + "'");
}

std::string to_string(MeanUpdateMatrix m) {
  return m == MeanUpdateMatrix::posterior_information ? "posterior_information"
                                                      : "fused_prior_information";
}

void UpdateOptions::validate() const {
  if (!(xi > 0.0)) throw ValidationError("update options: xi must be positive");
  if (!(likelihood_weight > 0.0)) {
    throw ValidationError("update options: likelihood_weight must be positive");
  }
}

double probit(double u) { return 0.5 * std::erfc(-u / std::numbers::sqrt2); }

double normal_pdf(double u) { return std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi); }

std::pair<double, double> probit_closed_forms(double mean_u, double var_u, double xi) {
  const double beta = 1.0 + xi * xi * var_u;
  const double first = probit(xi * mean_u / std::sqrt(beta));
  // exp underflows to exactly 0 for extreme means; that is a valid no-op scale.
  const double second = std::sqrt(xi * xi / (2.0 * std::numbers::pi * beta)) *
                        std::exp(-0.5 * xi * xi * mean_u * mean_u / beta);
  return {first, second};
}

namespace {

Projection project(const GaussianBelief& b, const Eigen::VectorXd& phi) {
  check_phi(b.dim(), phi);
  double var_u = 0.0;
  if (b.has_covariance()) {
    var_u = phi.dot(*b.covariance_cache() * phi);
  } else {
    Eigen::LLT<Matrix> llt(b.information());
    var_u = phi.dot(llt.solve(phi));
  }
  return {phi.dot(b.mean()), var_u};
}

Projection project(const DiagGaussianBelief& b, const Eigen::VectorXd& phi) {
  check_phi(b.dim(), phi);
  return {phi.dot(b.mean()), phi.cwiseAbs2().cwiseQuotient(b.info_diag()).sum()};
}

}  // namespace

double expected_sigmoid(const GaussianBelief& belief, const Eigen::VectorXd& phi, double xi) {
  const auto p = project(belief, phi);
  return probit_closed_forms(p.mean_u, p.var_u, xi).first;
}

double expected_sigmoid(const DiagGaussianBelief& belief, const Eigen::VectorXd& phi, double xi) {
  const auto p = project(belief, phi);
  return probit_closed_forms(p.mean_u, p.var_u, xi).first;
}

Eigen::VectorXd expected_loglik_gradient(const GaussianBelief& belief, const Eigen::VectorXd& phi,
                                         int y, double xi) {
  check_label(y);
  return (static_cast<double>(y) - expected_sigmoid(belief, phi, xi)) * phi;
}

double hessian_scale(const GaussianBelief& belief, const Eigen::VectorXd& phi, double xi) {
  const auto p = project(belief, phi);
  return probit_closed_forms(p.mean_u, p.var_u, xi).second;
}

double hessian_scale(const DiagGaussianBelief& belief, const Eigen::VectorXd& phi, double xi) {
  const auto p = project(belief, phi);
  return probit_closed_forms(p.mean_u, p.var_u, xi).second;
}

GaussianBelief gvi_classify_update(const GaussianBelief& prior, const Eigen::VectorXd& phi, int y,
                                   const UpdateOptions& opts) {
  opts.validate();
  check_label(y);
  check_phi(prior.dim(), phi);

  const Matrix computed = prior.has_covariance() ? Matrix() : prior.covariance();
  const Matrix& sigma = prior.has_covariance() ? *prior.covariance_cache() : computed;
  const Eigen::VectorXd sigma_phi = sigma * phi;
  const double var_u = phi.dot(sigma_phi);
  const double mean_u = phi.dot(prior.mean());
  const auto [prob, scale] = probit_closed_forms(mean_u, var_u, opts.xi);
  const double gamma = opts.likelihood_weight * scale;
  const double innovation = opts.likelihood_weight * (static_cast<double>(y) - prob);

  Matrix information = prior.information();
  information.noalias() += gamma * phi * phi.transpose();
  information = symmetrize(information);
  Matrix covariance = rank1_inverse_update(sigma, phi, gamma);

  // Sigma_{t+1} phi = Sigma^g phi / c, c = 1 + gamma phi^T Sigma^g phi.
  const double c = 1.0 + gamma * var_u;
  Eigen::VectorXd mean = prior.mean();
  if (opts.mean_update_matrix == MeanUpdateMatrix::posterior_information) {
    mean += (innovation / c) * sigma_phi;
  } else {
    mean += innovation * sigma_phi;
  }
  return GaussianBelief(GaussianBelief::Trusted{}, std::move(mean), std::move(information),
                        std::move(covariance));
}

DiagGaussianBelief diag_gvi_classify_update(const DiagGaussianBelief& prior,
                                            const Eigen::VectorXd& phi, int y,
                                            const UpdateOptions& opts) {
  opts.validate();
  check_label(y);
  const auto p = project(prior, phi);
  const auto [prob, scale] = probit_closed_forms(p.mean_u, p.var_u, opts.xi);
  const double gamma = opts.likelihood_weight * scale;
  const double innovation = opts.likelihood_weight * (static_cast<double>(y) - prob);

  Eigen::VectorXd info = prior.info_diag() + gamma * phi.cwiseAbs2();
  const Eigen::VectorXd& scale_by =
      opts.mean_update_matrix == MeanUpdateMatrix::posterior_information ? info
                                                                         : prior.info_diag();
  Eigen::VectorXd mean = prior.mean() + innovation * phi.cwiseQuotient(scale_by);
  return DiagGaussianBelief(std::move(mean), std::move(info));
}

GaussianBelief gvi_regression_update(const GaussianBelief& prior, const Eigen::MatrixXd& phi,
                                     const Eigen::VectorXd& y, const Eigen::MatrixXd& precision,
                                     const UpdateOptions& opts) {
  opts.validate();
  if (phi.rows() != prior.dim() || phi.cols() != y.size() || precision.rows() != y.size() ||
      precision.cols() != y.size()) {
    throw ValidationError("regression update: dimension mismatch");
  }
  const Matrix s = opts.likelihood_weight * precision;
  const Matrix sigma = prior.covariance();

  Matrix information = prior.information();
  information.noalias() += phi * s * phi.transpose();
  information = symmetrize(information);
  Matrix covariance = low_rank_inverse_update(sigma, phi, s);

  const Eigen::VectorXd innovation = phi * (s * (y - phi.transpose() * prior.mean()));
  Eigen::VectorXd mean = prior.mean();
  if (opts.mean_update_matrix == MeanUpdateMatrix::posterior_information) {
    mean += covariance * innovation;
  } else {
    mean += sigma * innovation;
  }
  return GaussianBelief(GaussianBelief::Trusted{}, std::move(mean), std::move(information),
                        std::move(covariance));
}

GaussianBelief dgvi_classify_step(std::span<const GaussianBelief> beliefs,
                                  std::span<const double> weights, const Eigen::VectorXd& phi,
                                  int y, const UpdateOptions& opts) {
  return gvi_classify_update(geometric_fuse(beliefs, weights), phi, y, opts);
}

GaussianBelief dgvi_classify_step(std::span<const GaussianBelief> beliefs,
                                  std::span<const double> weights,
                                  const ClassificationObservation& obs, const KernelModel& model,
                                  const UpdateOptions& opts) {
  return dgvi_classify_step(beliefs, weights, featurize(model, obs.x), obs.y, opts);
}

DiagGaussianBelief diag_dgvi_classify_step(std::span<const DiagGaussianBelief> beliefs,
                                           std::span<const double> weights,
                                           const Eigen::VectorXd& phi, int y,
                                           const UpdateOptions& opts) {
  return diag_gvi_classify_update(geometric_fuse_diag(beliefs, weights), phi, y, opts);
}

DiagGaussianBelief diag_dgvi_classify_step(std::span<const DiagGaussianBelief> beliefs,
                                           std::span<const double> weights,
                                           const ClassificationObservation& obs,
                                           const KernelModel& model, const UpdateOptions& opts) {
  return diag_dgvi_classify_step(beliefs, weights, featurize(model, obs.x), obs.y, opts);
}

GaussianBelief dgvi_regression_step(std::span<const GaussianBelief> beliefs,
                                    std::span<const double> weights, const Eigen::MatrixXd& phi,
                                    const Eigen::VectorXd& y, const Eigen::MatrixXd& precision,
                                    const UpdateOptions& opts) {
  return gvi_regression_update(geometric_fuse(beliefs, weights), phi, y, precision, opts);
}

GaussianBelief dgvi_regression_step(std::span<const GaussianBelief> beliefs,
                                    std::span<const double> weights,
                                    const RegressionObservation& obs, const KernelModel& model,
                                    const UpdateOptions& opts) {
  if (obs.x.size() != static_cast<std::size_t>(obs.y.size())) {
    throw ValidationError("regression observation: " + std::to_string(obs.x.size()) +
                          " inputs but " + std::to_string(obs.y.size()) + " targets");
  }
  return dgvi_regression_step(beliefs, weights, feature_block(model, obs.x), obs.y, obs.precision,
                              opts);
}

Eigen::MatrixXd feature_block(const KernelModel& model, std::span<const Eigen::VectorXd> xs) {
  Eigen::MatrixXd out(model.feature_dim(), static_cast<Eigen::Index>(xs.size()));
  for (std::size_t k = 0; k < xs.size(); ++k) {
    out.col(static_cast<Eigen::Index>(k)) = featurize(model, xs[k]);
  }
  return out;
}

std::vector<double> predict_batch(const GaussianBelief& belief, const KernelModel& model,
                                  const Eigen::MatrixXd& points, double xi) {
  const GaussianBelief b = belief.with_covariance();
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(points.rows()));
  Eigen::VectorXd phi;
  for (Eigen::Index r = 0; r < points.rows(); ++r) {
    featurize_into(model, points.row(r).transpose(), phi);
    out.push_back(expected_sigmoid(b, phi, xi));
  }
  return out;
}

std::vector<double> predict_batch(const DiagGaussianBelief& belief, const KernelModel& model,
                                  const Eigen::MatrixXd& points, double xi) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(points.rows()));
  Eigen::VectorXd phi;
  for (Eigen::Index r = 0; r < points.rows(); ++r) {
    featurize_into(model, points.row(r).transpose(), phi);
    out.push_back(expected_sigmoid(belief, phi, xi));
  }
  return out;
}

std::vector<double> predict_mean_batch(const Eigen::VectorXd& mean, const KernelModel& model,
                                       const Eigen::MatrixXd& points) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(points.rows()));
  Eigen::VectorXd phi;
  for (Eigen::Index r = 0; r < points.rows(); ++r) {
    featurize_into(model, points.row(r).transpose(), phi);
    out.push_back(phi.dot(mean));
  }
  return out;
}

Eigen::MatrixXd points_matrix(std::span<const LabeledPoint> points) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(points.size()), 2);
  for (std::size_t i = 0; i < points.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = points[i].x.transpose();
  }
  return out;
}

}  // namespace dgvi
