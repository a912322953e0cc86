#include "dgvi/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "dgvi/belief.hpp"
#include "dgvi/errors.hpp"
#include "dgvi/features.hpp"
#include "dgvi/network.hpp"
#include "dgvi/oracle.hpp"
#include "dgvi/vi.hpp"

namespace dgvi {
namespace {

Matrix random_spd(int n, double lo, double hi, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> eig(lo, hi);
  Matrix g(n, n);
  for (auto& v : g.reshaped()) v = normal(rng);
  const Matrix q = Eigen::HouseholderQR<Matrix>(g).householderQ();
  Vector lambda(n);
  for (auto& v : lambda) v = eig(rng);
  return symmetrize(q * lambda.asDiagonal() * q.transpose());
}

Vector random_vector(int n, double sd, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, sd);
  Vector v(n);
  for (auto& x : v) x = normal(rng);
  return v;
}

std::string fmt(const char* label, double v) {
  std::ostringstream os;
  os << label << v;
  return os.str();
}

CheckResult make(std::string name, double value, double tol, std::string detail = {}) {
  return {std::move(name), value, tol, value <= tol, std::move(detail)};
}

}  // namespace

CheckResult check_unit_circle(std::uint64_t seed, int n_particles) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<GaussianBelief> priors;
  for (int k = 0; k < 4; ++k) {
    const double a = k * std::numbers::pi / 2.0;
    priors.emplace_back(Vector{{std::cos(a), std::sin(a)}}, Matrix::Identity(2, 2));
  }
  const std::vector<double> w(4, 0.25);
  const LinearGaussianModel model{Matrix::Identity(2, 2), Matrix::Identity(2, 2)};
  const Vector z{{1.0, 1.0}};
  const auto exact = conjugate_fusion_posterior(priors, w, model, z);
  const auto particles = particle_fusion_posterior(priors, w, model, z, n_particles, seed);
  const double gap = (particles.fitted.mean() - exact.mean()).norm();
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::ostringstream os;
  os << "conjugate mean (" << exact.mean()(0) << ", " << exact.mean()(1) << "), particle mean ("
     << particles.fitted.mean()(0) << ", " << particles.fitted.mean()(1)
     << "), ess " << particles.effective_sample_size << ", " << secs << " s";
  return make("unit-circle fusion: particle vs conjugate mean gap", gap, 0.1, os.str());
}

CheckResult check_woodbury(std::uint64_t seed, int n_cases, int max_dim) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> dim(1, max_dim);
  std::uniform_real_distribution<double> gamma(0.0, 1.0);
  double worst = 0.0;
  for (int c = 0; c < n_cases; ++c) {
    const int n = c == 0 ? max_dim : dim(rng);
    const Matrix sigma = random_spd(n, 0.1, 10.0, rng);
    const Vector phi = random_vector(n, 1.0, rng);
    const double g = gamma(rng);
    const Matrix fast = rank1_inverse_update(sigma, phi, g);
    const Matrix info = sigma.inverse() + g * phi * phi.transpose();
    const Matrix dense = info.inverse();
    worst = std::max(worst, (fast - dense).cwiseAbs().maxCoeff());
  }
  return make("woodbury vs dense inverse (max abs)", worst, 1e-8,
              std::to_string(n_cases) + " cases up to " + std::to_string(max_dim) + "x" +
                  std::to_string(max_dim));
}

CheckResult check_sinkhorn(std::uint64_t seed, int n_cases, int max_n) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> size(2, max_n);
  std::uniform_real_distribution<double> value(0.05, 5.0);
  std::bernoulli_distribution extra(0.2);
  double worst = 0.0;
  for (int c = 0; c < n_cases; ++c) {
    const int n = c == 0 ? max_n : size(rng);
    // Positive diagonal, a ring and random extra links with symmetric support:
    // irreducible with total support, values unrestricted.
    Matrix m = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i) {
      m(i, i) = value(rng);
      const int j = (i + 1) % n;
      m(i, j) = value(rng);
      m(j, i) = value(rng);
    }
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        if (m(i, j) == 0.0 && extra(rng)) {
          m(i, j) = value(rng);
          m(j, i) = value(rng);
        }
      }
    }
    const WeightMatrix a = sinkhorn_normalize(m);
    const double row = (a.entries().rowwise().sum().array() - 1.0).abs().maxCoeff();
    const double col = (a.entries().colwise().sum().array() - 1.0).abs().maxCoeff();
    worst = std::max({worst, row, col});
  }
  return make("sinkhorn row/col sums (max abs dev)", worst, kSinkhornTolerance,
              std::to_string(n_cases) + " matrices, n <= " + std::to_string(max_n));
}

CheckResult check_metropolis(std::uint64_t seed, int n_cases, int max_n) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> size(2, max_n);
  std::bernoulli_distribution extra(0.15);
  double worst = 0.0;
  for (int c = 0; c < n_cases; ++c) {
    const int n = size(rng);
    std::vector<Edge> edges;
    for (int i = 1; i < n; ++i) {
      edges.emplace_back(std::uniform_int_distribution<int>(0, i - 1)(rng), i);
    }
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        if (extra(rng)) edges.emplace_back(i, j);
      }
    }
    const WeightMatrix a = metropolis_weights(edges, n);
    const double row = (a.entries().rowwise().sum().array() - 1.0).abs().maxCoeff();
    const double col = (a.entries().colwise().sum().array() - 1.0).abs().maxCoeff();
    worst = std::max({worst, row, col});
  }
  return make("metropolis row/col sums (max abs dev)", worst, kSinkhornTolerance,
              std::to_string(n_cases) + " random connected graphs");
}

std::vector<CheckResult> check_probit(std::uint64_t seed, int n_cases, int mc_samples) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> dim(1, 8);
  std::uniform_real_distribution<double> info_scale(0.2, 5.0);
  double worst_quad = 0.0;
  double worst_mc = 0.0;
  for (int c = 0; c < n_cases; ++c) {
    const int n = dim(rng);
    const GaussianBelief belief(random_vector(n, 1.0, rng),
                                random_spd(n, 0.2, 1.0, rng) * info_scale(rng));
    const Vector phi = random_vector(n, 1.0, rng);
    const double m = phi.dot(belief.mean());
    const double v = phi.dot(belief.covariance() * phi);
    const auto [e_gamma, hess] = probit_closed_forms(m, v, kDefaultXi);
    const auto [q_gamma, q_hess] = quadrature_probit_moments(m, v, kDefaultXi);
    worst_quad = std::max({worst_quad, std::abs(e_gamma - q_gamma), std::abs(hess - q_hess)});

    const int y = static_cast<int>(rng() & 1u);
    const auto mc = mc_expected_sigmoid(belief, phi, mc_samples, rng());
    worst_mc = std::max(worst_mc, std::abs(expected_sigmoid(belief, phi, kDefaultXi) - mc.value));
    const auto mc_grad = mc_expected_gradient(belief, phi, y, mc_samples, rng());
    const Vector grad = expected_loglik_gradient(belief, phi, y, kDefaultXi);
    worst_mc = std::max(worst_mc, (grad - mc_grad.mean).cwiseAbs().maxCoeff());
  }
  return {make("probit closed forms vs quadrature (max abs)", worst_quad, 1e-6,
               std::to_string(n_cases) + " random (belief, phi)"),
          make("probit closed forms vs sigmoid Monte Carlo (max abs)", worst_mc, 0.02,
               std::to_string(mc_samples) + " samples per case")};
}

CheckResult check_regression(std::uint64_t seed, int n_cases, int max_dim, int max_outputs) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> dim(1, max_dim);
  std::uniform_int_distribution<int> outputs(1, max_outputs);
  double worst = 0.0;
  for (int c = 0; c < n_cases; ++c) {
    const int n = dim(rng);
    const int m = outputs(rng);
    const GaussianBelief prior(random_vector(n, 1.0, rng), random_spd(n, 0.5, 5.0, rng));
    Matrix phi(n, m);
    for (auto& v : phi.reshaped()) v = std::normal_distribution<double>()(rng);
    const Matrix s = random_spd(m, 0.5, 2.0, rng);
    const Vector y = random_vector(m, 1.0, rng);

    const std::vector<GaussianBelief> beliefs{prior};
    const std::vector<double> w{1.0};
    const auto post = dgvi_regression_step(beliefs, w, phi, y, s);

    // Information filter: add H^T S H and H^T S y, then solve.
    const Matrix info = prior.information() + phi * s * phi.transpose();
    const Vector eta = prior.information() * prior.mean() + phi * s * y;
    const Vector mean = info.ldlt().solve(eta);
    worst = std::max({worst, (post.mean() - mean).cwiseAbs().maxCoeff(),
                      (post.information() - info).cwiseAbs().maxCoeff(),
                      (post.covariance() - info.inverse()).cwiseAbs().maxCoeff()});
  }
  return make("regression step vs information filter (max abs)", worst, 1e-8,
              std::to_string(n_cases) + " problems, dim <= " + std::to_string(max_dim) +
                  ", m <= " + std::to_string(max_outputs));
}

std::vector<CheckResult> check_spd(std::uint64_t seed, int n_steps) {
  constexpr int kAgents = 4;
  constexpr int kCenters = 20;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coord(-3.0, 3.0);
  Matrix centers(kCenters, 2);
  for (auto& v : centers.reshaped()) v = coord(rng);
  const KernelModel model(centers, 1.0, 0.5);
  const std::vector<Edge> ring{{0, 1}, {1, 2}, {2, 3}, {3, 0}};
  const WeightMatrix a = metropolis_weights(ring, kAgents);
  const int dim = model.feature_dim();

  std::vector<GaussianBelief> full(kAgents, GaussianBelief::isotropic(dim, 1.0));
  std::vector<DiagGaussianBelief> diag(kAgents, DiagGaussianBelief::isotropic(dim, 1.0));
  int chol_failures = 0;
  double worst_full_drop = 0.0;
  double worst_diag_drop = 0.0;
  int steps = 0;
  while (steps < n_steps) {
    std::vector<GaussianBelief> next_full;
    std::vector<DiagGaussianBelief> next_diag;
    for (int i = 0; i < kAgents && steps < n_steps; ++i, ++steps) {
      const auto row = a.row(i);
      const Vector x{{coord(rng), coord(rng)}};
      const Vector phi = featurize(model, x);
      const int y = static_cast<int>(rng() & 1u);

      const auto prior_full = geometric_fuse(full, row);
      auto post_full = gvi_classify_update(prior_full, phi, y);
      if (Eigen::LLT<Matrix>(post_full.information()).info() != Eigen::Success) ++chol_failures;
      worst_full_drop = std::max(
          worst_full_drop,
          (prior_full.information().diagonal() - post_full.information().diagonal()).maxCoeff());
      next_full.push_back(std::move(post_full));

      const auto prior_diag = geometric_fuse_diag(diag, row);
      auto post_diag = diag_gvi_classify_update(prior_diag, phi, y);
      worst_diag_drop =
          std::max(worst_diag_drop, (prior_diag.info_diag() - post_diag.info_diag()).maxCoeff());
      next_diag.push_back(std::move(post_diag));
    }
    if (static_cast<int>(next_full.size()) == kAgents) {
      full = std::move(next_full);
      diag = std::move(next_diag);
    }
  }
  return {make("spd: Cholesky failures over random steps", chol_failures, 0.0,
               std::to_string(n_steps) + " fused classification steps"),
          make("spd: max drop of information diagonal below fused prior",
               std::max(worst_full_drop, worst_diag_drop), 0.0,
               fmt("full ", worst_full_drop) + fmt(", diagonal ", worst_diag_drop))};
}

std::vector<CheckResult> run_suite(const std::string& suite, std::uint64_t seed) {
  std::vector<CheckResult> out;
  const bool all = suite == "all";
  bool matched = all;
  auto add = [&](const std::string& name, auto&& fn) {
    if (!all && suite != name) return;
    matched = true;
    auto r = fn();
    if constexpr (std::is_same_v<decltype(r), CheckResult>) {
      out.push_back(std::move(r));
    } else {
      for (auto& x : r) out.push_back(std::move(x));
    }
  };
  add("unit_circle", [&] { return check_unit_circle(seed); });
  add("woodbury", [&] { return check_woodbury(seed); });
  add("sinkhorn", [&] {
    return std::vector<CheckResult>{check_sinkhorn(seed), check_metropolis(seed)};
  });
  add("probit", [&] { return check_probit(seed); });
  add("regression", [&] { return check_regression(seed); });
  add("spd", [&] { return check_spd(seed); });
  if (!matched) {
    throw ValidationError("unknown verify suite '" + suite +
                          "' (expected unit_circle, woodbury, sinkhorn, probit, regression, spd, all)");
  }
  return out;
}

}  // namespace dgvi
