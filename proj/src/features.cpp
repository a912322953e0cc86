#include "dgvi/features.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "dgvi/errors.hpp"

namespace dgvi {

KernelModel::KernelModel(Eigen::MatrixXd centers, double scale, Eigen::VectorXd lengthscales)
    : centers_(std::move(centers)), scale_(scale), lengthscales_(std::move(lengthscales)) {
  if (centers_.rows() < 1) throw ValidationError("kernel model needs at least one center");
  if (centers_.cols() < 1) throw ValidationError("kernel centers need a positive input dimension");
  if (lengthscales_.size() != centers_.rows()) {
    throw ValidationError("kernel model: " + std::to_string(centers_.rows()) + " centers but " +
                          std::to_string(lengthscales_.size()) + " lengthscales");
  }
  if (!(scale_ > 0.0)) throw ValidationError("kernel scale must be positive");
  if (!(lengthscales_.minCoeff() > 0.0)) {
    throw ValidationError("kernel lengthscales must be positive");
  }
  if (!centers_.allFinite()) throw ValidationError("kernel centers must be finite");
}

KernelModel::KernelModel(Eigen::MatrixXd centers, double scale, double lengthscale)
    : KernelModel(centers, scale, Eigen::VectorXd::Constant(centers.rows(), lengthscale)) {}

void featurize_into(const KernelModel& model, const Eigen::Ref<const Eigen::VectorXd>& x,
                    Eigen::VectorXd& out) {
  if (x.size() != model.input_dim()) {
    throw ValidationError("featurize: point has dimension " + std::to_string(x.size()) +
                          ", model expects " + std::to_string(model.input_dim()));
  }
  const auto& centers = model.centers();
  const auto& ls = model.lengthscales();
  out.resize(model.feature_dim());
  out[0] = 1.0;
  for (int s = 0; s < model.num_centers(); ++s) {
    const double d2 = (centers.row(s).transpose() - x).squaredNorm();
    out[s + 1] = model.scale() * std::exp(-ls[s] * d2);
  }
}

Eigen::VectorXd featurize(const KernelModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  Eigen::VectorXd out;
  featurize_into(model, x, out);
  return out;
}

KernelModel select_centers(std::span<const LabeledPoint> points, int n_occupied, int n_random,
                           double lengthscale_occupied, double lengthscale_free, double scale,
                           std::uint64_t seed) {
  if (n_occupied < 0 || n_random < 0 || n_occupied + n_random < 1) {
    throw ValidationError("select_centers: need a positive number of centers");
  }
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> occupied;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].label == 1) occupied.push_back(i);
  }
  if (static_cast<std::size_t>(n_occupied) > occupied.size()) {
    throw ValidationError("select_centers: asked for " + std::to_string(n_occupied) +
                          " occupied centers but only " + std::to_string(occupied.size()) +
                          " occupied points exist");
  }
  std::shuffle(occupied.begin(), occupied.end(), rng);
  occupied.resize(n_occupied);

  std::vector<bool> taken(points.size(), false);
  for (auto i : occupied) taken[i] = true;
  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!taken[i]) rest.push_back(i);
  }
  if (static_cast<std::size_t>(n_random) > rest.size()) {
    throw ValidationError("select_centers: asked for " + std::to_string(n_random) +
                          " random centers but only " + std::to_string(rest.size()) +
                          " points remain");
  }
  std::shuffle(rest.begin(), rest.end(), rng);
  rest.resize(n_random);

  const int total = n_occupied + n_random;
  Eigen::MatrixXd centers(total, 2);
  Eigen::VectorXd ls(total);
  int row = 0;
  for (auto i : occupied) {
    centers.row(row) = points[i].x.transpose();
    ls[row++] = lengthscale_occupied;
  }
  for (auto i : rest) {
    centers.row(row) = points[i].x.transpose();
    ls[row++] = lengthscale_free;
  }
  return KernelModel(std::move(centers), scale, std::move(ls));
}

}  // namespace dgvi
