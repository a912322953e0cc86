#pragma once

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Dense>

namespace testutil {

inline Eigen::MatrixXd random_spd(int n, std::mt19937_64& rng, double lo = 0.3, double hi = 3.0) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> eig(lo, hi);
  Eigen::MatrixXd g(n, n);
  for (auto& v : g.reshaped()) v = normal(rng);
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ();
  Eigen::VectorXd lambda(n);
  for (auto& v : lambda) v = eig(rng);
  Eigen::MatrixXd m = q * lambda.asDiagonal() * q.transpose();
  return 0.5 * (m + m.transpose());
}

inline Eigen::VectorXd random_vector(int n, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> normal(0.0, sd);
  Eigen::VectorXd v(n);
  for (auto& x : v) x = normal(rng);
  return v;
}

inline double max_abs(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

// log N(x | mean, cov) evaluated from scratch.
inline double log_density(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                          const Eigen::MatrixXd& cov) {
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(cov);
  const Eigen::VectorXd d = x - mean;
  const double quad = d.dot(ldlt.solve(d));
  const double logdet = ldlt.vectorD().array().log().sum();
  return -0.5 * (quad + logdet + static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi));
}

inline double logistic(double u) { return 1.0 / (1.0 + std::exp(-u)); }

inline double std_normal_cdf(double u) { return 0.5 * std::erfc(-u / std::sqrt(2.0)); }

}  // namespace testutil
