#pragma once

#include <cstdint>
#include <span>

#include <Eigen/Dense>

#include "dgvi/data.hpp"

namespace dgvi {

/// RBF feature map Phi_x = [1, k_1(x), ..., k_l(x)] with
/// k_s(x) = scale * exp(-lengthscale_s * |x - c_s|^2).
///
/// Immutable after construction; shared by all agents of a run.
class KernelModel {
 public:
  /// `centers` is l x d, one center per row; `lengthscales` has l entries.
  KernelModel(Eigen::MatrixXd centers, double scale, Eigen::VectorXd lengthscales);
  /// Same lengthscale for every center.
  KernelModel(Eigen::MatrixXd centers, double scale, double lengthscale);

  int num_centers() const { return static_cast<int>(centers_.rows()); }
  int input_dim() const { return static_cast<int>(centers_.cols()); }
  /// l + 1
  int feature_dim() const { return num_centers() + 1; }

  const Eigen::MatrixXd& centers() const { return centers_; }
  double scale() const { return scale_; }
  const Eigen::VectorXd& lengthscales() const { return lengthscales_; }

 private:
  Eigen::MatrixXd centers_;
  double scale_;
  Eigen::VectorXd lengthscales_;
};

Eigen::VectorXd featurize(const KernelModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);

/// Writes Phi_x into `out` (resized to feature_dim()).
void featurize_into(const KernelModel& model, const Eigen::Ref<const Eigen::VectorXd>& x,
                    Eigen::VectorXd& out);

/// Draws `n_occupied` centers from the occupied points, then `n_random` from the
/// remaining points (any label), both without replacement. Occupied-drawn centers
/// get `lengthscale_occupied`, the rest `lengthscale_free`.
KernelModel select_centers(std::span<const LabeledPoint> points, int n_occupied, int n_random,
                           double lengthscale_occupied, double lengthscale_free, double scale,
                           std::uint64_t seed);

}  // namespace dgvi
