#include "dgvi/belief.hpp"

#include <cmath>
#include <random>
#include <string>

#include "dgvi/errors.hpp"

namespace dgvi {
namespace {

void check_weights(std::size_t count, std::span<const double> weights) {
  if (count == 0) throw ValidationError("fusion needs at least one belief");
  if (weights.size() != count) {
    throw ValidationError("fusion weights: expected " + std::to_string(count) + " entries, got " +
                          std::to_string(weights.size()));
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw ValidationError("fusion weights must be nonnegative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw ValidationError("fusion weights must sum to 1 (got " + std::to_string(total) + ")");
  }
}

void check_symmetric_pd(const Matrix& information) {
  if (information.rows() != information.cols()) {
    throw ValidationError("information matrix must be square");
  }
  const double scale = std::max(1.0, information.cwiseAbs().maxCoeff());
  if ((information - information.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw ValidationError("information matrix is not symmetric");
  }
  Eigen::LLT<Matrix> llt(information);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("information matrix is not positive definite");
  }
}

}  // namespace

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

GaussianBelief::GaussianBelief(Vector mean, Matrix information)
    : mean_(std::move(mean)), information_(std::move(information)) {
  if (information_.rows() != mean_.size()) {
    throw ValidationError("belief mean and information dimensions differ");
  }
  check_symmetric_pd(information_);
}

GaussianBelief::GaussianBelief(Vector mean, Matrix information, Matrix covariance)
    : GaussianBelief(std::move(mean), std::move(information)) {
  if (covariance.rows() != dim() || covariance.cols() != dim()) {
    throw ValidationError("covariance cache has the wrong shape");
  }
  const double residual =
      (information_ * covariance - Matrix::Identity(dim(), dim())).cwiseAbs().maxCoeff();
  if (residual > 1e-6) {
    throw ValidationError("covariance cache is inconsistent with the information matrix");
  }
  covariance_ = std::move(covariance);
}

GaussianBelief::GaussianBelief(Trusted, Vector mean, Matrix information,
                               std::optional<Matrix> covariance)
    : mean_(std::move(mean)),
      information_(std::move(information)),
      covariance_(std::move(covariance)) {}

GaussianBelief GaussianBelief::isotropic(Eigen::Index dim, double lambda) {
  if (dim < 1) throw ValidationError("belief dimension must be positive");
  if (!(lambda > 0.0)) throw ValidationError("prior information must be positive");
  return GaussianBelief(Trusted{}, Vector::Zero(dim), lambda * Matrix::Identity(dim, dim),
                        (1.0 / lambda) * Matrix::Identity(dim, dim));
}

Matrix GaussianBelief::covariance() const {
  if (covariance_) return *covariance_;
  Eigen::LLT<Matrix> llt(information_);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("information matrix is not positive definite");
  }
  return symmetrize(llt.solve(Matrix::Identity(dim(), dim())));
}

Vector GaussianBelief::information_mean() const { return information_ * mean_; }

GaussianBelief GaussianBelief::with_covariance() const {
  if (covariance_) return *this;
  return GaussianBelief(Trusted{}, mean_, information_, covariance());
}

DiagGaussianBelief::DiagGaussianBelief(Vector mean, Vector info_diag)
    : mean_(std::move(mean)), info_diag_(std::move(info_diag)) {
  if (mean_.size() != info_diag_.size()) {
    throw ValidationError("belief mean and information diagonal dimensions differ");
  }
  if (mean_.size() < 1) throw ValidationError("belief dimension must be positive");
  for (Eigen::Index k = 0; k < info_diag_.size(); ++k) {
    if (!(info_diag_[k] > 0.0) || !std::isfinite(info_diag_[k])) {
      throw NumericalError("diagonal information entry " + std::to_string(k) +
                           " is not strictly positive");
    }
  }
}

DiagGaussianBelief DiagGaussianBelief::isotropic(Eigen::Index dim, double lambda) {
  if (!(lambda > 0.0)) throw ValidationError("prior information must be positive");
  return DiagGaussianBelief(Vector::Zero(dim), Vector::Constant(dim, lambda));
}

GaussianBelief geometric_fuse(std::span<const GaussianBelief> beliefs,
                              std::span<const double> weights) {
  check_weights(beliefs.size(), weights);
  if (beliefs.size() == 1) return beliefs.front();

  const Eigen::Index dim = beliefs.front().dim();
  std::vector<Matrix> infos;
  std::vector<Vector> etas;
  infos.reserve(beliefs.size());
  etas.reserve(beliefs.size());
  for (const auto& b : beliefs) {
    if (b.dim() != dim) throw ValidationError("fusion: belief dimensions differ");
    infos.push_back(b.information());
    etas.push_back(b.information_mean());
  }
  return fuse_information(infos, etas, weights);
}

GaussianBelief fuse_information(std::span<const Matrix> informations,
                                std::span<const Vector> information_means,
                                std::span<const double> weights) {
  check_weights(informations.size(), weights);
  if (information_means.size() != informations.size()) {
    throw ValidationError("fusion: information and information-mean counts differ");
  }
  const Eigen::Index dim = informations.front().rows();
  Matrix info = Matrix::Zero(dim, dim);
  Vector eta = Vector::Zero(dim);
  for (std::size_t j = 0; j < informations.size(); ++j) {
    if (informations[j].rows() != dim || informations[j].cols() != dim ||
        information_means[j].size() != dim) {
      throw ValidationError("fusion: belief dimensions differ");
    }
    if (weights[j] == 0.0) continue;
    info.noalias() += weights[j] * informations[j];
    eta.noalias() += weights[j] * information_means[j];
  }
  Eigen::LLT<Matrix> llt(info);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("fused information matrix is not positive definite");
  }
  Vector mean = llt.solve(eta);
  return GaussianBelief(GaussianBelief::Trusted{}, std::move(mean), std::move(info));
}

DiagGaussianBelief geometric_fuse_diag(std::span<const DiagGaussianBelief> beliefs,
                                       std::span<const double> weights) {
  check_weights(beliefs.size(), weights);
  if (beliefs.size() == 1) return beliefs.front();
  std::vector<Vector> infos;
  std::vector<Vector> etas;
  for (const auto& b : beliefs) {
    infos.push_back(b.info_diag());
    etas.push_back(b.info_diag().cwiseProduct(b.mean()));
  }
  return fuse_information_diag(infos, etas, weights);
}

DiagGaussianBelief fuse_information_diag(std::span<const Vector> info_diags,
                                         std::span<const Vector> information_means,
                                         std::span<const double> weights) {
  check_weights(info_diags.size(), weights);
  if (information_means.size() != info_diags.size()) {
    throw ValidationError("fusion: information and information-mean counts differ");
  }
  const Eigen::Index dim = info_diags.front().size();
  Vector info = Vector::Zero(dim);
  Vector eta = Vector::Zero(dim);
  for (std::size_t j = 0; j < info_diags.size(); ++j) {
    if (info_diags[j].size() != dim || information_means[j].size() != dim) {
      throw ValidationError("fusion: belief dimensions differ");
    }
    if (weights[j] == 0.0) continue;
    info += weights[j] * info_diags[j];
    eta += weights[j] * information_means[j];
  }
  if (!(info.minCoeff() > 0.0)) {
    throw NumericalError("fused diagonal information is not positive");
  }
  Vector mean = eta.cwiseQuotient(info);
  return DiagGaussianBelief(std::move(mean), std::move(info));
}

Matrix rank1_inverse_update(const Matrix& covariance, const Vector& phi, double gamma) {
  if (covariance.rows() != phi.size() || covariance.cols() != phi.size()) {
    throw ValidationError("rank-1 update: dimension mismatch");
  }
  if (!(gamma >= 0.0)) throw ValidationError("rank-1 update: gamma must be nonnegative");
  if (gamma == 0.0) return covariance;
  const Vector sigma_phi = covariance * phi;
  const double c = 1.0 + gamma * phi.dot(sigma_phi);
  if (!(c > 0.0)) throw NumericalError("rank-1 update: covariance is not positive definite");
  Matrix out = covariance;
  out.noalias() -= (gamma / c) * sigma_phi * sigma_phi.transpose();
  return symmetrize(out);
}

Matrix low_rank_inverse_update(const Matrix& covariance, const Matrix& phi,
                               const Matrix& precision) {
  if (covariance.rows() != phi.rows() || covariance.cols() != phi.rows() ||
      precision.rows() != phi.cols() || precision.cols() != phi.cols()) {
    throw ValidationError("low-rank update: dimension mismatch");
  }
  Eigen::LLT<Matrix> s_llt(precision);
  if (s_llt.info() != Eigen::Success) {
    throw ValidationError("observation precision is not positive definite");
  }
  const Eigen::Index m = phi.cols();
  const Matrix sigma_phi = covariance * phi;
  const Matrix inner = s_llt.solve(Matrix::Identity(m, m)) + phi.transpose() * sigma_phi;
  Eigen::LLT<Matrix> inner_llt(symmetrize(inner));
  if (inner_llt.info() != Eigen::Success) {
    throw NumericalError("low-rank update: innovation matrix is not positive definite");
  }
  Matrix out = covariance;
  out.noalias() -= sigma_phi * inner_llt.solve(sigma_phi.transpose());
  return symmetrize(out);
}

double kl_gaussian(const GaussianBelief& p, const GaussianBelief& q) {
  if (p.dim() != q.dim()) throw ValidationError("KL: dimension mismatch");
  Eigen::LLT<Matrix> llt_p(p.information());
  Eigen::LLT<Matrix> llt_q(q.information());
  if (llt_p.info() != Eigen::Success || llt_q.info() != Eigen::Success) {
    throw NumericalError("KL: information matrix is not positive definite");
  }
  const Matrix cov_p = llt_p.solve(Matrix::Identity(p.dim(), p.dim()));
  const Vector diff = q.mean() - p.mean();
  const double trace = (q.information() * cov_p).trace();
  const double quad = diff.dot(q.information() * diff);
  const double logdet_p = 2.0 * Matrix(llt_p.matrixL()).diagonal().array().log().sum();
  const double logdet_q = 2.0 * Matrix(llt_q.matrixL()).diagonal().array().log().sum();
  const double kl =
      0.5 * (trace + quad - static_cast<double>(p.dim()) + logdet_p - logdet_q);
  return std::max(0.0, kl);
}

Matrix sample_gaussian(const GaussianBelief& belief, int count, std::uint64_t seed) {
  if (count <= 0) throw ValidationError("sample count must be positive");
  Eigen::LLT<Matrix> llt(belief.information());
  if (llt.info() != Eigen::Success) {
    throw NumericalError("sampling: information matrix is not positive definite");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::Index dim = belief.dim();
  Matrix z(dim, count);
  for (Eigen::Index c = 0; c < count; ++c) {
    for (Eigen::Index r = 0; r < dim; ++r) z(r, c) = normal(rng);
  }
  // Omega = L L^T, so L^-T z has covariance Omega^-1.
  Matrix draws = llt.matrixU().solve(z);
  draws.colwise() += belief.mean();
  return draws.transpose();
}

}  // namespace dgvi
