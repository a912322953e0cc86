#pragma once

#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace dgvi {

using Edge = std::pair<int, int>;

/// Nonnegative n x n mixing matrix. Row i holds the weights agent i applies to
/// the beliefs of its in-neighbors (and itself).
class WeightMatrix {
 public:
  /// Validates nonnegativity; `normalized` additionally requires every row and
  /// column sum within 1e-9 of 1.
  explicit WeightMatrix(Eigen::MatrixXd entries, bool normalized = false);

  int size() const { return static_cast<int>(entries_.rows()); }
  const Eigen::MatrixXd& entries() const { return entries_; }
  bool normalized() const { return normalized_; }
  double operator()(int i, int j) const { return entries_(i, j); }

  /// Row i as a contiguous vector.
  std::vector<double> row(int i) const;
  /// Indices j with A_ij > 0 (always includes i when the diagonal is positive).
  std::vector<int> in_neighbors(int i) const;

 private:
  Eigen::MatrixXd entries_;
  bool normalized_;
};

inline constexpr double kSinkhornTolerance = 1e-10;
inline constexpr int kSinkhornMaxIterations = 10000;

/// Alternating row/column scaling to a doubly stochastic matrix.
/// Throws ValidationError on negative entries or a non-positive diagonal and
/// NumericalError if the sums are not within `tol` after `max_iter` sweeps.
WeightMatrix sinkhorn_normalize(const Eigen::MatrixXd& m, double tol = kSinkhornTolerance,
                                int max_iter = kSinkhornMaxIterations);

/// Symmetric Metropolis-Hastings weights for an undirected connected graph:
/// A_ij = 1 / (1 + max(deg_i, deg_j)) on edges, A_ii = 1 - sum_j A_ij.
WeightMatrix metropolis_weights(std::span<const Edge> edges, int n);

bool is_strongly_connected(const Eigen::MatrixXd& a);
inline bool is_strongly_connected(const WeightMatrix& a) {
  return is_strongly_connected(a.entries());
}

/// Per-agent sum over parameters of |mu_i - mean_j(mu_j)|.
std::vector<double> consensus_error(std::span<const Eigen::VectorXd> means);

}  // namespace dgvi
