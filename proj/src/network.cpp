#include "dgvi/network.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>
#include <string>

#include "dgvi/errors.hpp"

namespace dgvi {
namespace {

constexpr double kNormalizedTolerance = 1e-9;

bool sums_within(const Eigen::MatrixXd& a, double tol) {
  const double row_err = (a.rowwise().sum().array() - 1.0).abs().maxCoeff();
  const double col_err = (a.colwise().sum().array() - 1.0).abs().maxCoeff();
  return row_err <= tol && col_err <= tol;
}

// Nodes reachable from `start` following positive entries, either along rows
// (forward) or columns (reverse).
std::vector<bool> reachable(const Eigen::MatrixXd& a, int start, bool forward) {
  const int n = static_cast<int>(a.rows());
  std::vector<bool> seen(n, false);
  std::deque<int> queue{start};
  seen[start] = true;
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    for (int v = 0; v < n; ++v) {
      const double w = forward ? a(u, v) : a(v, u);
      if (w > 0.0 && !seen[v]) {
        seen[v] = true;
        queue.push_back(v);
      }
    }
  }
  return seen;
}

}  // namespace

WeightMatrix::WeightMatrix(Eigen::MatrixXd entries, bool normalized)
    : entries_(std::move(entries)), normalized_(normalized) {
  if (entries_.rows() != entries_.cols() || entries_.rows() == 0) {
    throw ValidationError("weight matrix must be square and nonempty");
  }
  if (!entries_.allFinite() || entries_.minCoeff() < 0.0) {
    throw ValidationError("weight matrix entries must be finite and nonnegative");
  }
  if (normalized_ && !sums_within(entries_, kNormalizedTolerance)) {
    throw ValidationError("weight matrix is flagged normalized but is not doubly stochastic");
  }
}

std::vector<double> WeightMatrix::row(int i) const {
  std::vector<double> out(entries_.cols());
  for (int j = 0; j < size(); ++j) out[j] = entries_(i, j);
  return out;
}

std::vector<int> WeightMatrix::in_neighbors(int i) const {
  std::vector<int> out;
  for (int j = 0; j < size(); ++j) {
    if (entries_(i, j) > 0.0) out.push_back(j);
  }
  return out;
}

WeightMatrix sinkhorn_normalize(const Eigen::MatrixXd& m, double tol, int max_iter) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw ValidationError("sinkhorn: matrix must be square and nonempty");
  }
  if (!m.allFinite() || m.minCoeff() < 0.0) {
    throw ValidationError("sinkhorn: entries must be finite and nonnegative");
  }
  if (!(m.diagonal().minCoeff() > 0.0)) {
    throw ValidationError("sinkhorn: diagonal must be strictly positive");
  }
  Eigen::MatrixXd a = m;
  for (int iter = 0; iter < max_iter; ++iter) {
    // Rows last: fusion consumes rows, so they are the sums kept exact.
    const Eigen::RowVectorXd cols = a.colwise().sum();
    a = a * cols.cwiseInverse().asDiagonal();
    const Eigen::VectorXd rows = a.rowwise().sum();
    a = rows.cwiseInverse().asDiagonal() * a;
    if (sums_within(a, tol)) return WeightMatrix(std::move(a), tol <= kNormalizedTolerance);
  }
  throw NumericalError("sinkhorn: no convergence within " + std::to_string(max_iter) +
                       " iterations (matrix lacks total support?)");
}

WeightMatrix metropolis_weights(std::span<const Edge> edges, int n) {
  if (n < 1) throw ValidationError("metropolis: graph needs at least one node");
  std::vector<std::set<int>> adj(n);
  for (const auto& [i, j] : edges) {
    if (i < 0 || j < 0 || i >= n || j >= n) {
      throw ValidationError("metropolis: edge (" + std::to_string(i) + "," + std::to_string(j) +
                            ") out of range");
    }
    if (i == j) continue;
    adj[i].insert(j);
    adj[j].insert(i);
  }
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j : adj[i]) {
      const auto deg = std::max(adj[i].size(), adj[j].size());
      a(i, j) = 1.0 / (1.0 + static_cast<double>(deg));
    }
  }
  for (int i = 0; i < n; ++i) a(i, i) = 1.0 - a.row(i).sum();
  if (!is_strongly_connected(a)) throw ValidationError("metropolis: graph is disconnected");
  return WeightMatrix(std::move(a), true);
}

bool is_strongly_connected(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols() || a.rows() == 0) return false;
  const auto fwd = reachable(a, 0, true);
  const auto bwd = reachable(a, 0, false);
  return std::all_of(fwd.begin(), fwd.end(), [](bool b) { return b; }) &&
         std::all_of(bwd.begin(), bwd.end(), [](bool b) { return b; });
}

std::vector<double> consensus_error(std::span<const Eigen::VectorXd> means) {
  if (means.empty()) throw ValidationError("consensus error: no agents");
  const Eigen::Index dim = means.front().size();
  // Offsets from the first agent keep identical means exactly at zero error.
  const Eigen::VectorXd& ref = means.front();
  Eigen::VectorXd offset = Eigen::VectorXd::Zero(dim);
  for (const auto& m : means) {
    if (m.size() != dim) throw ValidationError("consensus error: mean lengths differ");
    offset += m - ref;
  }
  offset /= static_cast<double>(means.size());
  std::vector<double> out;
  out.reserve(means.size());
  for (const auto& m : means) out.push_back(((m - ref) - offset).cwiseAbs().sum());
  return out;
}

}  // namespace dgvi
