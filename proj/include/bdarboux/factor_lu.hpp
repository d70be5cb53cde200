#pragma once

// Lower-upper factorization of the generator, A = L U with L lower and U
// upper bidiagonal, parametrized by the killing rate mu0_hat of the
// transformed process.  The coefficient arrays solve
//   lambda_n = s_n x_n,   mu_n = r_n y_{n-1},
//   -(lambda_n + mu_n) = r_n x_{n-1} + s_n y_n,
// and the Darboux transform U L is again a birth-death generator.
//
// Two independent computation routes are provided: the closed forms in terms
// of the kernel partial sums P_n = sum_{k<=n} pi_k Q_k(0)^2, and the scalar
// recursions in (t_n, q_n).  The closed route switches to a tail
// representation when mu0_hat exceeds lambda_0 + mu_0: writing the
// denominator as D_n = K + (c-1) sum_{k>n} pi_k Q_k(0)^2 with
// K = (S-1)(bound - mu0_hat)/(lambda_0+mu_0) keeps full precision at and
// near the admissibility bound, where the direct difference c + (1-c) P_n
// loses every significant digit.

#include <Eigen/Core>
#include <cmath>
#include <limits>
#include <vector>

#include "bdarboux/errors.hpp"
#include "bdarboux/ladder.hpp"
#include "bdarboux/polynomials.hpp"
#include "bdarboux/process.hpp"
#include "bdarboux/series.hpp"

namespace bdarboux {

struct LUFactors {
  // Index n = 0..N.  r_tilde[0] is NaN: the subdiagonal starts at n = 1.
  Eigen::ArrayXd s_tilde, r_tilde, x_tilde, y_tilde, t_tilde, q_tilde;
  double mu0_hat = 0.0;

  Eigen::Index level() const { return s_tilde.size() - 1; }
};

// Largest admissible killing rate of the transformed process:
// (lambda_0 + mu_0) S/(S-1) when the kernel series S is finite,
// lambda_0 + mu_0 otherwise.
inline double lu_admissible_upper_bound(const BirthDeathProcess& p,
                                        const SeriesOptions& opt = {}) {
  SeriesVerdict s = series_S(p, opt);
  if (s.undetermined()) throw UndeterminedSeries("kernel weight series S");
  double base = p.lambda(0) + p.mu0();
  if (s.divergent()) return base;
  return base * s.value / (s.value - 1.0);
}

namespace detail {

// Inclusive log-scale tails log sum_{k>=n} exp(log_term(k)) for n = 0..n_min,
// extending the summation adaptively past n_min until the terms have dropped
// 60 e-folds below their running peak (or a hard cap).
inline std::vector<double> log_tail_table(const std::function<double(long)>& log_term,
                                          long n_min, long cap_extra = 400000) {
  std::vector<double> lt;
  lt.reserve(static_cast<size_t>(n_min) + 64);
  double peak_after = -std::numeric_limits<double>::infinity();
  long m = 0;
  for (;; ++m) {
    double v = log_term(m);
    lt.push_back(v);
    if (m > n_min) {
      peak_after = std::max(peak_after, v);
      if (v < peak_after - 60.0) break;
      if (m > n_min + cap_extra) break;
    }
  }
  std::vector<double> tail(static_cast<size_t>(n_min) + 2,
                           -std::numeric_limits<double>::infinity());
  double acc = -std::numeric_limits<double>::infinity();
  for (long k = m; k >= 0; --k) {
    acc = log_add_exp(acc, lt[static_cast<size_t>(k)]);
    if (k <= n_min + 1) tail[static_cast<size_t>(k)] = acc;
  }
  return tail;  // tail[k] = log sum_{j>=k} term_j, k = 0..n_min+1
}

struct LUTables {
  LogWeightLadder ladder;   // 0..N+1
  Eigen::ArrayXd q0;        // Q_n(0), 0..N+1
  Eigen::ArrayXd d;         // D_n, linear scale, 0..N
  Eigen::ArrayXd log_d;     // log D_n - computed stably per branch
  double c = 0.0;
  double bound = std::numeric_limits<double>::infinity();
};

inline LUTables lu_tables(const BirthDeathProcess& p, double mu0_hat, Eigen::Index n_max,
                          const SeriesOptions& opt) {
  if (!(mu0_hat >= 0.0))
    throw InadmissibleMu0Hat("mu0_hat must be >= 0", -1, mu0_hat);
  LUTables t;
  t.ladder = build_ladder(p, n_max + 1);
  t.q0 = q_at_zero_family(p, t.ladder);
  double base = p.lambda(0) + p.mu0();
  t.c = mu0_hat / base;
  t.d.resize(n_max + 1);
  t.log_d.resize(n_max + 1);

  if (t.c <= 1.0) {
    // All-positive forward accumulation; always admissible in this range.
    t.bound = std::numeric_limits<double>::quiet_NaN();  // not needed
    double pn = 0.0;
    for (Eigen::Index n = 0; n <= n_max; ++n) {
      pn += std::exp(t.ladder.log_pi[n]) * t.q0[n] * t.q0[n];
      t.d[n] = t.c + (1.0 - t.c) * pn;
      t.log_d[n] = std::log(t.d[n]);
    }
    return t;
  }

  SeriesVerdict s = series_S(p, opt);
  if (s.undetermined()) throw UndeterminedSeries("kernel weight series S");
  if (s.divergent())
    throw InadmissibleMu0Hat("mu0_hat exceeds lambda_0 + mu_0 and the kernel series diverges",
                             -1, mu0_hat);
  t.bound = base * s.value / (s.value - 1.0);
  double slack = s.tail_bound * base / ((s.value - 1.0) * (s.value - 1.0)) +
                 8.0 * std::numeric_limits<double>::epsilon() * t.bound;
  if (mu0_hat > t.bound + slack)
    throw InadmissibleMu0Hat("mu0_hat exceeds the admissible upper bound", -1, mu0_hat);

  // K vanishes exactly when mu0_hat sits at the bound, so the tail form keeps
  // the boundary factorization exact instead of cancelling to noise.
  double k_head = (s.value - 1.0) * (t.bound - mu0_hat) / base;
  double cm1 = t.c - 1.0;
  double log_pi_cursor = 0.0;
  double a_cursor = 0.0;
  long cursor = -1;
  auto log_term = [&](long k) -> double {
    // sequential access only
    if (k != cursor + 1) throw DomainError("lu tail generator is sequential");
    cursor = k;
    if (k > 0) {
      a_cursor += std::exp(-std::log(p.lambda(k - 1)) - log_pi_cursor);
      log_pi_cursor += std::log(p.lambda(k - 1)) - std::log(p.mu(k));
    }
    double q = 1.0 + p.mu0() * a_cursor;
    return log_pi_cursor + 2.0 * std::log(q);
  };
  std::vector<double> tail = log_tail_table(log_term, n_max);  // inclusive
  for (Eigen::Index n = 0; n <= n_max; ++n) {
    double log_r_excl = tail[static_cast<size_t>(n) + 1];  // sum_{k>n}
    double rn = std::exp(log_r_excl);
    t.d[n] = k_head + cm1 * rn;
    // log D_n via the ratio to pi_n to survive underflow of R_n itself
    double log_ratio = log_add_exp(
        std::log(k_head) - t.ladder.log_pi[n],
        std::log(cm1) + log_r_excl - t.ladder.log_pi[n]);
    t.log_d[n] = log_ratio + t.ladder.log_pi[n];
  }
  return t;
}

}  // namespace detail

// Closed-form coefficient route.
inline LUFactors lu_factorize(const BirthDeathProcess& p, double mu0_hat, Eigen::Index n_max,
                              const SeriesOptions& opt = {}) {
  if (n_max < 1) throw DomainError("lu_factorize needs N >= 1");
  detail::LUTables t = detail::lu_tables(p, mu0_hat, n_max, opt);
  LUFactors f;
  f.mu0_hat = mu0_hat;
  f.s_tilde.resize(n_max + 1);
  f.r_tilde.resize(n_max + 1);
  f.x_tilde.resize(n_max + 1);
  f.y_tilde.resize(n_max + 1);
  f.t_tilde.resize(n_max + 1);
  f.q_tilde.resize(n_max + 1);
  f.r_tilde[0] = std::numeric_limits<double>::quiet_NaN();
  for (Eigen::Index n = 0; n <= n_max; ++n) {
    double sn = std::exp(t.log_d[n] - t.ladder.log_pi[n]) / t.q0[n];
    if (!(sn > 0.0) || !std::isfinite(sn))
      throw InadmissibleMu0Hat("diagonal coefficient s_n is not positive", n, sn);
    f.s_tilde[n] = sn;
    if (n >= 1)
      f.r_tilde[n] = -std::exp(t.log_d[n - 1] - t.ladder.log_pi[n]) / t.q0[n];
    f.x_tilde[n] = p.lambda(n) / sn;
    f.q_tilde[n] = -t.q0[n + 1] / t.q0[n];
    f.y_tilde[n] = f.q_tilde[n] * f.x_tilde[n];
    f.t_tilde[n] = (n == 0) ? 1.0 : (1.0 - t.c) * t.q0[n];
  }
  return f;
}

// Independent scalar-recursion route: the Riccati-type recursion for q_n,
// the product recursion for t_n, and the first-order recursion for s_n.
// Used as a cross-check against the closed forms.
inline LUFactors lu_factorize_recursive(const BirthDeathProcess& p, double mu0_hat,
                                        Eigen::Index n_max, const SeriesOptions& = {}) {
  if (n_max < 1) throw DomainError("lu_factorize_recursive needs N >= 1");
  if (!(mu0_hat >= 0.0))
    throw InadmissibleMu0Hat("mu0_hat must be >= 0", -1, mu0_hat);
  LUFactors f;
  f.mu0_hat = mu0_hat;
  f.s_tilde.resize(n_max + 1);
  f.r_tilde.resize(n_max + 1);
  f.x_tilde.resize(n_max + 1);
  f.y_tilde.resize(n_max + 1);
  f.t_tilde.resize(n_max + 1);
  f.q_tilde.resize(n_max + 1);
  f.r_tilde[0] = std::numeric_limits<double>::quiet_NaN();
  double l0 = p.lambda(0), m0 = p.mu0();
  f.q_tilde[0] = -(l0 + m0) / l0;
  f.t_tilde[0] = 1.0;
  f.s_tilde[0] = 1.0;
  f.x_tilde[0] = l0;
  f.y_tilde[0] = f.q_tilde[0] * f.x_tilde[0];
  for (Eigen::Index n = 1; n <= n_max; ++n) {
    double ln = p.lambda(n), mn = p.mu(n);
    f.q_tilde[n] = -1.0 - mn / ln - mn / (ln * f.q_tilde[n - 1]);
    f.t_tilde[n] = (n == 1) ? 1.0 + (m0 - mu0_hat) / l0
                            : -f.q_tilde[n - 1] * f.t_tilde[n - 1];
    double sn = f.t_tilde[n] -
                (mn / p.lambda(n - 1)) * f.s_tilde[n - 1] / f.q_tilde[n - 1];
    if (!(sn > 0.0) || !std::isfinite(sn))
      throw InadmissibleMu0Hat("diagonal coefficient s_n is not positive", n, sn);
    f.s_tilde[n] = sn;
    f.r_tilde[n] = f.t_tilde[n] - sn;
    f.x_tilde[n] = ln / sn;
    f.y_tilde[n] = f.q_tilde[n] * f.x_tilde[n];
  }
  return f;
}

// Assemble the two bidiagonal factors as dense N x N matrices.
inline Eigen::MatrixXd lu_lower_matrix(const LUFactors& f, Eigen::Index n) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    m(i, i) = f.s_tilde[i];
    if (i >= 1) m(i, i - 1) = f.r_tilde[i];
  }
  return m;
}

inline Eigen::MatrixXd lu_upper_matrix(const LUFactors& f, Eigen::Index n) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    m(i, i) = f.y_tilde[i];
    if (i + 1 < n) m(i, i + 1) = f.x_tilde[i];
  }
  return m;
}

// Darboux transform: swap the factors.  U L is the generator of the
// birth-death process with rates
//   lambda_hat_n = x_n s_{n+1},   mu_hat_n = y_n r_n,
// and killing rate mu0_hat.  The result is table-backed up to level N-1.
inline BirthDeathProcess lu_darboux(const BirthDeathProcess& p, double mu0_hat,
                                    Eigen::Index n_max, const SeriesOptions& opt = {}) {
  LUFactors f = lu_factorize(p, mu0_hat, n_max, opt);
  std::vector<double> lam(static_cast<size_t>(n_max));
  std::vector<double> mu(static_cast<size_t>(n_max));
  for (Eigen::Index n = 0; n < n_max; ++n)
    lam[static_cast<size_t>(n)] = f.x_tilde[n] * f.s_tilde[n + 1];
  for (Eigen::Index n = 1; n <= n_max; ++n)
    mu[static_cast<size_t>(n - 1)] = f.y_tilde[n] * f.r_tilde[n];
  BirthDeathProcess out = make_table(std::move(lam), std::move(mu), mu0_hat);
  return BirthDeathProcess([out](long n) { return out.lambda(n); },
                           [out](long n) { return out.mu(n); }, mu0_hat,
                           p.label() + "/darboux-lu");
}

// Polynomial family of the Darboux-transformed process, through the kernel
// sum  Qhat_n(x) = sum_{k<=n} pi_k Q_k(0) Q_k(x) / D_n, valid at every x.
inline double lu_transformed_poly(const BirthDeathProcess& p, double mu0_hat, long n,
                                  double x, const SeriesOptions& opt = {}) {
  detail::LUTables t = detail::lu_tables(p, mu0_hat, n, opt);
  PolynomialEvaluator e{&p, PolyFamily::Primary};
  Eigen::ArrayXd qx = eval_family(e, n, x);
  double num = 0.0;
  for (long k = 0; k <= n; ++k)
    num += std::exp(t.ladder.log_pi[k]) * t.q0[k] * qx[k];
  return num / t.d[n];
}

// Ratio form of the same family, -(x_n Q_{n+1}(x) + y_n Q_n(x))/x; needs
// x != 0.  Cross-check companion of the kernel-sum form.
inline double lu_transformed_poly_ratio(const LUFactors& f, const BirthDeathProcess& p,
                                        long n, double x) {
  if (x == 0.0) throw DomainError("ratio form of the transformed family needs x != 0");
  PolynomialEvaluator e{&p, PolyFamily::Primary};
  Eigen::ArrayXd qx = eval_family(e, n + 1, x);
  return -(f.x_tilde[n] * qx[n + 1] + f.y_tilde[n] * qx[n]) / x;
}

}  // namespace bdarboux
