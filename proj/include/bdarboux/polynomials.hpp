#pragma once

// The orthogonal-polynomial family attached to a birth-death process,
//   Q_{-1} = 0, Q_0 = 1,
//   -x Q_n = lambda_n Q_{n+1} - (lambda_n + mu_n + [n=0] mu0) Q_n + mu_n Q_{n-1},
// and its 0-th associated family (Q_0 = 0, Q_1 = -1/lambda_0, same recurrence
// from n = 1 on), plus the Christoffel-Darboux kernel identities that the
// factorization transforms are built from.

#include <Eigen/Core>
#include <cmath>

#include "bdarboux/errors.hpp"
#include "bdarboux/ladder.hpp"
#include "bdarboux/process.hpp"

namespace bdarboux {

enum class PolyFamily { Primary, Associated };

struct PolynomialEvaluator {
  const BirthDeathProcess* process;
  PolyFamily family = PolyFamily::Primary;
};

inline constexpr long kMaxPolyDegree = 200;

namespace detail {

// Forward three-term recurrence; returns values of the family at degrees
// 0..n.  Templated on the scalar so tests can cross-check in extended
// precision.
template <typename Scalar>
Eigen::Array<Scalar, Eigen::Dynamic, 1> recurrence_family(const BirthDeathProcess& p,
                                                          PolyFamily family, long n,
                                                          Scalar x) {
  if (n < 0) throw DomainError("polynomial degree must be >= 0");
  if (n > kMaxPolyDegree)
    throw DomainError("polynomial degree beyond supported range (max 200)");
  Eigen::Array<Scalar, Eigen::Dynamic, 1> q(n + 1);
  q[0] = (family == PolyFamily::Primary) ? Scalar(1) : Scalar(0);
  if (n == 0) return q;
  Scalar l0 = Scalar(p.lambda(0));
  if (family == PolyFamily::Primary) {
    q[1] = (Scalar(p.lambda(0) + p.mu0()) - x) / l0;
  } else {
    q[1] = Scalar(-1) / l0;
  }
  for (long k = 1; k < n; ++k) {
    Scalar lk = Scalar(p.lambda(k));
    Scalar mk = Scalar(p.mu(k));
    q[k + 1] = ((lk + mk - x) * q[k] - mk * q[k - 1]) / lk;
  }
  return q;
}

}  // namespace detail

inline Eigen::ArrayXd eval_family(const PolynomialEvaluator& e, long n, double x) {
  return detail::recurrence_family<double>(*e.process, e.family, n, x);
}

inline double eval(const PolynomialEvaluator& e, long n, double x) {
  if (n < 0) {
    if (e.family == PolyFamily::Primary) return 0.0;
    return q_assoc_at_zero(*e.process, -1);  // 1/mu0 convention
  }
  return eval_family(e, n, x)[n];
}

// | sum_{k<=n} pi_k Q_k(x) Q_k(y)
//   - lambda_n pi_n (Q_{n+1}(x) Q_n(y) - Q_n(x) Q_{n+1}(y)) / (y - x) |,
// reported relative to the larger side's magnitude plus one.
inline double cd_residual(const BirthDeathProcess& p, long n, double x, double y) {
  if (x == y) throw DomainError("cd_residual needs x != y");
  LogWeightLadder l = build_ladder(p, n + 1);
  PolynomialEvaluator e{&p, PolyFamily::Primary};
  Eigen::ArrayXd qx = eval_family(e, n + 1, x);
  Eigen::ArrayXd qy = eval_family(e, n + 1, y);
  double lhs = 0.0;
  for (long k = 0; k <= n; ++k) lhs += std::exp(l.log_pi[k]) * qx[k] * qy[k];
  double rhs = p.lambda(n) * std::exp(l.log_pi[n]) *
               (qx[n + 1] * qy[n] - qx[n] * qy[n + 1]) / (y - x);
  return std::abs(lhs - rhs) / (std::max(std::abs(lhs), std::abs(rhs)) + 1.0);
}

// Mixed kernel identity coupling the primary and associated families:
// 1 - (x - y) sum_{k<=n} pi_k Q_k(x) Q_k^assoc(y)
//   = lambda_n pi_n (Q_{n+1}(x) Q_n^assoc(y) - Q_n(x) Q_{n+1}^assoc(y)).
inline double cd_mixed_residual(const BirthDeathProcess& p, long n, double x, double y) {
  LogWeightLadder l = build_ladder(p, n + 1);
  PolynomialEvaluator ep{&p, PolyFamily::Primary};
  PolynomialEvaluator ea{&p, PolyFamily::Associated};
  Eigen::ArrayXd qx = eval_family(ep, n + 1, x);
  Eigen::ArrayXd qy = eval_family(ea, n + 1, y);
  double sum = 0.0;
  for (long k = 0; k <= n; ++k) sum += std::exp(l.log_pi[k]) * qx[k] * qy[k];
  double lhs = 1.0 - (x - y) * sum;
  double rhs = p.lambda(n) * std::exp(l.log_pi[n]) *
               (qx[n + 1] * qy[n] - qx[n] * qy[n + 1]);
  return std::abs(lhs - rhs) / (std::max(std::abs(lhs), std::abs(rhs)) + 1.0);
}

}  // namespace bdarboux
