#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dgvi {

/// Outcome of one oracle comparison: the worst observed discrepancy against its
/// tolerance.
struct CheckResult {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  std::string detail;
};

/// Four unit-covariance priors with means on the unit circle, H = I,
/// observation precision I, z = (1, 1): particle vs conjugate posterior mean gap.
CheckResult check_unit_circle(std::uint64_t seed, int n_particles = 100000);

/// rank1_inverse_update against a dense inverse of Sigma^-1 + gamma phi phi^T.
CheckResult check_woodbury(std::uint64_t seed, int n_cases = 100, int max_dim = 200);

/// Sinkhorn row/column sums on random irreducible nonnegative matrices.
CheckResult check_sinkhorn(std::uint64_t seed, int n_cases = 50, int max_n = 50);

/// Metropolis weights on random connected graphs: stochasticity without rescaling.
CheckResult check_metropolis(std::uint64_t seed, int n_cases = 50, int max_n = 50);

/// Closed-form probit expectations against quadrature (first entry) and against
/// logistic-sigmoid Monte Carlo (second entry).
std::vector<CheckResult> check_probit(std::uint64_t seed, int n_cases = 100,
                                      int mc_samples = 1000000);

/// Single-agent regression step against an information-filter update.
CheckResult check_regression(std::uint64_t seed, int n_cases = 100, int max_dim = 30,
                             int max_outputs = 5);

/// Random fused classification steps, full and diagonal: the posterior
/// information stays positive definite and its diagonal never drops below the
/// fused prior's.
std::vector<CheckResult> check_spd(std::uint64_t seed, int n_steps = 10000);

/// Suite names accepted by run_suite: unit_circle, woodbury, sinkhorn, probit,
/// regression, spd, all.
std::vector<CheckResult> run_suite(const std::string& suite, std::uint64_t seed);

}  // namespace dgvi
