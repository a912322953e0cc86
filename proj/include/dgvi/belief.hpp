#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace dgvi {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Gaussian density N(mean, information^-1) in information form.
///
/// The covariance is an optional cache. When present it is kept consistent
/// with the information matrix by every update in this library; when absent,
/// covariance() computes it with a Cholesky solve. Instances are immutable
/// values and safe to share across threads.
class GaussianBelief {
 public:
  /// Skips the symmetry/Cholesky/cache checks. Used by update rules whose
  /// outputs satisfy the invariants by construction.
  struct Trusted {};

  GaussianBelief(Vector mean, Matrix information);
  GaussianBelief(Vector mean, Matrix information, Matrix covariance);
  GaussianBelief(Trusted, Vector mean, Matrix information,
                 std::optional<Matrix> covariance = std::nullopt);

  /// N(0, (lambda I)^-1) with the covariance cache filled.
  static GaussianBelief isotropic(Eigen::Index dim, double lambda);

  Eigen::Index dim() const { return mean_.size(); }
  const Vector& mean() const { return mean_; }
  const Matrix& information() const { return information_; }
  bool has_covariance() const { return covariance_.has_value(); }
  const std::optional<Matrix>& covariance_cache() const { return covariance_; }

  /// Cached covariance if present, otherwise information^-1 via Cholesky.
  Matrix covariance() const;
  /// information * mean.
  Vector information_mean() const;
  /// Copy of this belief with the covariance cache populated.
  GaussianBelief with_covariance() const;

 private:
  Vector mean_;
  Matrix information_;
  std::optional<Matrix> covariance_;
};

/// Gaussian with diagonal information matrix diag(info_diag).
class DiagGaussianBelief {
 public:
  DiagGaussianBelief(Vector mean, Vector info_diag);

  static DiagGaussianBelief isotropic(Eigen::Index dim, double lambda);

  Eigen::Index dim() const { return mean_.size(); }
  const Vector& mean() const { return mean_; }
  const Vector& info_diag() const { return info_diag_; }
  Vector variance() const { return info_diag_.cwiseInverse(); }

 private:
  Vector mean_;
  Vector info_diag_;
};

/// Weighted geometric average prod_j q_j^{w_j}, renormalized.
/// Information = sum_j w_j Omega_j; mean solves Omega^g mu^g = sum_j w_j Omega_j mu_j.
/// A single belief with weight 1 is returned unchanged, covariance cache included.
GaussianBelief geometric_fuse(std::span<const GaussianBelief> beliefs,
                              std::span<const double> weights);

/// Same fusion on (information, information-weighted mean) pairs. This is the
/// form agents exchange over the network.
GaussianBelief fuse_information(std::span<const Matrix> informations,
                                std::span<const Vector> information_means,
                                std::span<const double> weights);

DiagGaussianBelief geometric_fuse_diag(std::span<const DiagGaussianBelief> beliefs,
                                       std::span<const double> weights);

DiagGaussianBelief fuse_information_diag(std::span<const Vector> info_diags,
                                         std::span<const Vector> information_means,
                                         std::span<const double> weights);

/// (Sigma^-1 + gamma phi phi^T)^-1 by the matrix inversion lemma,
/// Sigma - (gamma / c) Sigma phi phi^T Sigma with c = 1 + gamma phi^T Sigma phi.
/// The result is re-symmetrized. Throws NumericalError if c <= 0.
Matrix rank1_inverse_update(const Matrix& covariance, const Vector& phi, double gamma);

/// (Sigma^-1 + Phi S Phi^T)^-1 for an (dim x m) block Phi and m x m precision S:
/// Sigma - Sigma Phi (S^-1 + Phi^T Sigma Phi)^-1 Phi^T Sigma, re-symmetrized.
Matrix low_rank_inverse_update(const Matrix& covariance, const Matrix& phi,
                               const Matrix& precision);

/// KL[p || q] between two Gaussians of equal dimension.
double kl_gaussian(const GaussianBelief& p, const GaussianBelief& q);

/// count x dim matrix of draws from the belief; deterministic per seed.
Matrix sample_gaussian(const GaussianBelief& belief, int count, std::uint64_t seed);

/// (M + M^T) / 2
Matrix symmetrize(const Matrix& m);

}  // namespace dgvi
