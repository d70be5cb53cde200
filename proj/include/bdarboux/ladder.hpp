#pragma once

// Potential coefficients pi_0 = 1, pi_n = (lambda_0 ... lambda_{n-1}) /
// (mu_1 ... mu_n), kept in log scale because they grow or decay
// geometrically, together with the partial sums that drive the boundary
// polynomials:  a_n = sum_{k<n} 1/(lambda_k pi_k),  Q_n(0) = 1 + mu0 a_n,
// Q_n^{assoc}(0) = -a_n.

#include <Eigen/Core>
#include <cmath>
#include <limits>

#include "bdarboux/errors.hpp"
#include "bdarboux/process.hpp"

namespace bdarboux {

inline double log_add_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  double hi = std::max(a, b), lo = std::min(a, b);
  return hi + std::log1p(std::exp(lo - hi));
}

struct LogWeightLadder {
  // log pi_n and log sum_{k<=n} pi_k, n = 0..N.
  Eigen::ArrayXd log_pi;
  Eigen::ArrayXd log_partial_sum;

  Eigen::Index size() const { return log_pi.size(); }
  double pi(Eigen::Index n) const { return std::exp(log_pi[n]); }
};

inline LogWeightLadder build_ladder(const BirthDeathProcess& p, Eigen::Index n_max) {
  if (n_max < 0) throw DomainError("build_ladder needs N >= 0");
  LogWeightLadder l;
  l.log_pi.resize(n_max + 1);
  l.log_partial_sum.resize(n_max + 1);
  l.log_pi[0] = 0.0;
  l.log_partial_sum[0] = 0.0;
  for (Eigen::Index n = 1; n <= n_max; ++n) {
    l.log_pi[n] = l.log_pi[n - 1] + std::log(p.lambda(n - 1)) - std::log(p.mu(n));
    l.log_partial_sum[n] = log_add_exp(l.log_partial_sum[n - 1], l.log_pi[n]);
  }
  return l;
}

// Partial sums a_n = sum_{k=0}^{n-1} 1/(lambda_k pi_k) for n = 0..N+1.
// These are the weights of the pure-birth escape series; each term is
// exp(-log lambda_k - log pi_k), accumulated in linear scale (all positive).
inline Eigen::ArrayXd escape_partial_sums(const BirthDeathProcess& p,
                                          const LogWeightLadder& l) {
  Eigen::Index n = l.size();
  Eigen::ArrayXd a(n + 1);
  a[0] = 0.0;
  for (Eigen::Index k = 0; k < n; ++k)
    a[k + 1] = a[k] + std::exp(-std::log(p.lambda(k)) - l.log_pi[k]);
  return a;
}

// Q_n(0) = 1 + mu0 a_n, the boundary value of the orthogonal-polynomial
// family.  Nondecreasing in n, equal to 1 identically when mu0 = 0.
inline double q_at_zero(const BirthDeathProcess& p, long n) {
  if (n < 0) return 0.0;
  if (p.mu0() == 0.0) return 1.0;
  LogWeightLadder l = build_ladder(p, std::max<long>(n - 1, 0));
  double a = 0.0;
  for (long k = 0; k < n; ++k) a += std::exp(-std::log(p.lambda(k)) - l.log_pi[k]);
  return 1.0 + p.mu0() * a;
}

// Vectorized boundary values Q_k(0), k = 0..N, sharing one ladder.
inline Eigen::ArrayXd q_at_zero_family(const BirthDeathProcess& p,
                                       const LogWeightLadder& l) {
  Eigen::ArrayXd a = escape_partial_sums(p, l);
  return 1.0 + p.mu0() * a.head(l.size());
}

// Boundary values of the 0-th associated family: Q_n^{assoc}(0) = -a_n,
// with the convention Q_{-1}^{assoc}(0) = 1/mu0 for killed processes.
inline double q_assoc_at_zero(const BirthDeathProcess& p, long n) {
  if (n < 0) {
    if (p.mu0() == 0.0)
      throw DomainError("associated family boundary convention needs mu0 > 0 at n = -1");
    return 1.0 / p.mu0();
  }
  if (n == 0) return 0.0;
  LogWeightLadder l = build_ladder(p, n - 1);
  double a = 0.0;
  for (long k = 0; k < n; ++k) a += std::exp(-std::log(p.lambda(k)) - l.log_pi[k]);
  return -a;
}

}  // namespace bdarboux
