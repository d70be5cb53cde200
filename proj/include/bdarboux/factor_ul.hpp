#pragma once

// Upper-lower factorization of the generator, A = B C with B upper
// bidiagonal (diagonal y_n, superdiagonal x_n) and C lower bidiagonal
// (diagonal s_n, subdiagonal r_n, s_0 = 1), parametrized by the pair
// (x0, mu0_tilde): x0 becomes the birth rate at 0 and mu0_tilde the killing
// rate of the Darboux transform C B.
//
// Admissible parameters satisfy
//   0 < x0 + mu0_tilde <= mu_0 + 1/A,
//   mu0_tilde * T <= x0 + mu0_tilde   with T = sum pi_n u_n^2,
// where u_n = 1 + (mu_0 - x0 - mu0_tilde) a_n.  A conservative recurrent
// process has an empty parameter interval.
//
// Near the right endpoint both u_n and the partial remainders
// E_n = x0 + mu0_tilde - mu0_tilde sum_{k<=n} pi_k u_k^2 collapse by
// cancellation when accumulated forward, so the implementation switches to
// suffix-sum representations there: u_n = |delta| tailA_n + w with
// w = A (limit - x0 - mu0_tilde) vanishing exactly at the endpoint, and
// E_n = head + mu0_tilde sum_{k>n} pi_k u_k^2 with head = x0 + mu0_tilde
// - mu0_tilde T.

#include <Eigen/Core>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "bdarboux/errors.hpp"
#include "bdarboux/ladder.hpp"
#include "bdarboux/polynomials.hpp"
#include "bdarboux/process.hpp"
#include "bdarboux/series.hpp"

namespace bdarboux {

struct ULFactors {
  // Index n = 0..N.  r[0] and q[0] are NaN: subdiagonal entries start at 1.
  Eigen::ArrayXd x, y, s, r, u, q, t;
  double x0 = 0.0;
  double mu0_tilde = 0.0;

  Eigen::Index level() const { return x.size() - 1; }
};

struct ULAdmissibility {
  bool admissible = false;
  std::string reason;  // empty when admissible
  double x0 = 0.0;
  double mu0_tilde = 0.0;
  double delta = 0.0;        // mu_0 - (x0 + mu0_tilde)
  double upper_limit = 0.0;  // mu_0 + 1/A, or mu_0 itself when A diverges
  SeriesVerdict a;
  std::optional<SeriesVerdict> t;  // evaluated only when mu0_tilde > 0
};

// The u-weighted kernel series T = sum pi_n u_n^2 at a given x0 + mu0_tilde.
inline SeriesVerdict ul_series_T(const BirthDeathProcess& p, double x0_plus,
                                 const SeriesOptions& opt = {}) {
  if (opt.use_closed_form && p.hints().t) {
    if (auto c = p.hints().t(x0_plus)) return detail::from_closed_form(*c);
  }
  double delta = p.mu0() - x0_plus;
  double log_pi = 0.0;
  double a = 0.0;
  long cursor = -1;
  auto term = [&, delta](long n) -> double {
    if (n != cursor + 1) throw DomainError("series term generator is sequential");
    cursor = n;
    if (n > 0) {
      a += std::exp(-std::log(p.lambda(n - 1)) - log_pi);
      log_pi += std::log(p.lambda(n - 1)) - std::log(p.mu(n));
    }
    double u = 1.0 + delta * a;
    u = std::max(u, std::numeric_limits<double>::min());
    return log_pi + 2.0 * std::log(u);
  };
  return sum_series(term, opt);
}

inline ULAdmissibility ul_admissibility(const BirthDeathProcess& p, double x0,
                                        double mu0_tilde, const SeriesOptions& opt = {}) {
  if (!(x0 > 0.0) || !std::isfinite(x0))
    throw DomainError("UL factorization needs x0 > 0");
  if (!(mu0_tilde >= 0.0) || !std::isfinite(mu0_tilde))
    throw DomainError("UL factorization needs mu0_tilde >= 0");

  ULAdmissibility rep;
  rep.x0 = x0;
  rep.mu0_tilde = mu0_tilde;
  double x0p = x0 + mu0_tilde;
  rep.delta = p.mu0() - x0p;

  rep.a = series_A(p, opt);
  if (rep.a.undetermined()) throw UndeterminedSeries("escape weight series A");
  if (p.conservative() && rep.a.divergent()) throw ConservativeRecurrentBlocked();
  rep.upper_limit = rep.a.finite() ? p.mu0() + 1.0 / rep.a.value : p.mu0();

  double eps = std::numeric_limits<double>::epsilon();
  if (rep.a.finite()) {
    double slack = rep.a.tail_bound / (rep.a.value * rep.a.value) +
                   8.0 * eps * rep.upper_limit;
    if (x0p > rep.upper_limit + slack) {
      rep.reason = "x0 + mu0_tilde exceeds mu_0 + 1/A";
      return rep;
    }
  } else if (x0p > rep.upper_limit) {
    rep.reason = "x0 + mu0_tilde exceeds mu_0";
    return rep;
  }

  if (mu0_tilde > 0.0) {
    SeriesVerdict tv = ul_series_T(p, x0p, opt);
    rep.t = tv;
    if (tv.undetermined()) throw UndeterminedSeries("u-weighted kernel series T");
    if (tv.divergent()) {
      rep.reason = "mu0_tilde > 0 needs the u-weighted series T to converge";
      return rep;
    }
    double slack = mu0_tilde * tv.tail_bound + 8.0 * eps * x0p;
    if (mu0_tilde * tv.value > x0p + slack) {
      rep.reason = "mu0_tilde T exceeds x0 + mu0_tilde";
      return rep;
    }
  }
  rep.admissible = true;
  return rep;
}

namespace detail {

// Inclusive suffix log-sums of a term vector: out[k] = log sum_{j>=k} e^{v_j},
// with out[size] = -inf.
inline std::vector<double> log_suffix_sums(const std::vector<double>& v) {
  std::vector<double> out(v.size() + 1, -std::numeric_limits<double>::infinity());
  for (size_t k = v.size(); k-- > 0;) out[k] = log_add_exp(out[k + 1], v[k]);
  return out;
}

struct ULTables {
  std::vector<double> log_pi;  // 0..M
  Eigen::ArrayXd u;            // 0..N+1
  Eigen::ArrayXd e;            // E_n, 0..N
  double e_m1 = 0.0;           // E_{-1} = x0 + mu0_tilde
  double delta = 0.0;
  double x0p = 0.0;
};

inline ULTables ul_tables(const BirthDeathProcess& p, const ULAdmissibility& rep,
                          Eigen::Index n_max) {
  double x0p = rep.x0 + rep.mu0_tilde;
  double delta = rep.delta;
  double mu0t = rep.mu0_tilde;

  // The forward values u_n = 1 + delta a_n and E_n = x0p - mu0t sum pi u^2
  // are used as long as they keep a safe margin above zero over the working
  // window; close to the edge of the admissible interval they degenerate into
  // cancellation noise and the positive suffix forms take over.  The suffix
  // sums need the raw terms to drop 60 e-folds below their peak past N, so
  // the horizon grows geometrically until they have.
  const double floor_frac = 1e-6;

  // First pass over the working window alone.  When both forward forms stay
  // clear of their floors no suffix table is needed and no rate beyond
  // n_max + 1 is ever queried.
  {
    ULTables t;
    t.delta = delta;
    t.x0p = x0p;
    t.e_m1 = x0p;
    t.log_pi.assign(1, 0.0);
    std::vector<double> a_fwd(1, 0.0);
    double log_inv_k = -std::log(p.lambda(0));
    for (long k = 1; k <= n_max + 1; ++k) {
      a_fwd.push_back(a_fwd.back() + std::exp(log_inv_k));
      t.log_pi.push_back(t.log_pi.back() + std::log(p.lambda(k - 1)) - std::log(p.mu(k)));
      log_inv_k = -std::log(p.lambda(k)) - t.log_pi.back();
    }
    t.u.resize(n_max + 2);
    double u_min = std::numeric_limits<double>::infinity();
    for (long k = 0; k <= n_max + 1; ++k) {
      t.u[k] = 1.0 + delta * a_fwd[static_cast<size_t>(k)];
      u_min = std::min(u_min, t.u[k]);
    }
    bool forward_ok = !(delta < 0.0 && u_min <= floor_frac);
    if (forward_ok) {
      t.e.resize(n_max + 1);
      if (mu0t == 0.0) {
        t.e.setConstant(rep.x0);
      } else {
        double acc = 0.0;
        double e_min = std::numeric_limits<double>::infinity();
        for (Eigen::Index n = 0; n <= n_max; ++n) {
          acc += std::exp(t.log_pi[static_cast<size_t>(n)]) * t.u[n] * t.u[n];
          t.e[n] = x0p - mu0t * acc;
          e_min = std::min(e_min, t.e[n]);
        }
        forward_ok = e_min > floor_frac * x0p;
      }
    }
    if (forward_ok) {
      for (Eigen::Index n = 0; n <= n_max + 1; ++n)
        if (!(t.u[n] > 0.0) || !std::isfinite(t.u[n]))
          throw InadmissibleUL("coefficient u_n is not positive", n, "u");
      for (Eigen::Index n = 0; n <= n_max; ++n)
        if (!(t.e[n] > 0.0) || !std::isfinite(t.e[n]))
          throw InadmissibleUL("remainder E_n is not positive", n, "E");
      return t;
    }
  }

  long horizon = std::max<long>(2 * n_max + 64, 256);
  const long horizon_cap = 2000000;

  std::vector<double> log_pi, log_inv, log_t_term;
  std::vector<double> tail_a;
  Eigen::ArrayXd u;
  Eigen::ArrayXd e_fwd(n_max + 1);
  bool e_suffix = false;
  for (;;) {
    log_pi.assign(1, 0.0);
    log_inv.assign(1, -std::log(p.lambda(0)));
    log_pi.reserve(static_cast<size_t>(horizon) + 1);
    log_inv.reserve(static_cast<size_t>(horizon) + 1);
    std::vector<double> a_fwd(1, 0.0);
    a_fwd.reserve(static_cast<size_t>(horizon) + 2);
    for (long k = 1; k <= horizon; ++k) {
      a_fwd.push_back(a_fwd.back() + std::exp(log_inv.back()));
      log_pi.push_back(log_pi.back() + std::log(p.lambda(k - 1)) - std::log(p.mu(k)));
      log_inv.push_back(-std::log(p.lambda(k)) - log_pi.back());
    }
    a_fwd.push_back(a_fwd.back() + std::exp(log_inv.back()));

    u.resize(horizon + 1);
    double u_min = std::numeric_limits<double>::infinity();
    for (long k = 0; k <= horizon; ++k) {
      u[k] = 1.0 + delta * a_fwd[static_cast<size_t>(k)];
      if (k <= n_max + 1) u_min = std::min(u_min, u[k]);
    }
    bool u_suffix = delta < 0.0 && u_min <= floor_frac;

    bool ok = true;
    if (u_suffix) {
      double peak = -std::numeric_limits<double>::infinity();
      for (size_t k = static_cast<size_t>(n_max) + 2; k < log_inv.size(); ++k)
        peak = std::max(peak, log_inv[k]);
      if (log_inv.back() < peak - 60.0) {
        tail_a = log_suffix_sums(log_inv);
        double w = std::exp(tail_a[0]) * (rep.upper_limit - x0p);
        double mdelta = -delta;
        for (long k = 0; k <= horizon; ++k)
          u[k] = mdelta * std::exp(tail_a[static_cast<size_t>(k)]) + w;
      } else {
        ok = false;
      }
    }

    if (ok && mu0t > 0.0) {
      double acc = 0.0;
      double e_min = std::numeric_limits<double>::infinity();
      for (Eigen::Index n = 0; n <= n_max; ++n) {
        acc += std::exp(log_pi[static_cast<size_t>(n)]) * u[n] * u[n];
        e_fwd[n] = x0p - mu0t * acc;
        e_min = std::min(e_min, e_fwd[n]);
      }
      e_suffix = e_min <= floor_frac * x0p;
      if (e_suffix) {
        log_t_term.resize(static_cast<size_t>(horizon) + 1);
        for (long k = 0; k <= horizon; ++k) {
          double uk = std::max(u[k], std::numeric_limits<double>::min());
          log_t_term[static_cast<size_t>(k)] = log_pi[static_cast<size_t>(k)] + 2.0 * std::log(uk);
        }
        double peak = -std::numeric_limits<double>::infinity();
        for (size_t k = static_cast<size_t>(n_max) + 2; k < log_t_term.size(); ++k)
          peak = std::max(peak, log_t_term[k]);
        if (!(log_t_term.back() < peak - 60.0)) ok = false;
      }
    }

    if (ok) break;
    if (horizon >= horizon_cap)
      throw UndeterminedSeries("suffix tables for the UL factorization did not decay");
    horizon = std::min(horizon_cap, 2 * horizon + 1000);
  }

  ULTables t;
  t.delta = delta;
  t.x0p = x0p;
  t.e_m1 = x0p;
  t.log_pi.assign(log_pi.begin(), log_pi.begin() + n_max + 2);
  t.u = u.head(n_max + 2);
  for (Eigen::Index n = 0; n <= n_max + 1; ++n)
    if (!(t.u[n] > 0.0) || !std::isfinite(t.u[n]))
      throw InadmissibleUL("coefficient u_n is not positive", n, "u");

  t.e.resize(n_max + 1);
  if (mu0t == 0.0) {
    t.e.setConstant(rep.x0);
  } else if (!e_suffix) {
    t.e = e_fwd;
  } else {
    // rep.t is present and finite whenever mu0_tilde > 0 passed admissibility
    std::vector<double> tail_t = log_suffix_sums(log_t_term);
    double t_used = (rep.t && rep.t->evidence == "closed-form rule")
                        ? rep.t->value
                        : std::exp(tail_t[0]);
    double head = x0p - mu0t * t_used;
    for (Eigen::Index n = 0; n <= n_max; ++n)
      t.e[n] = head + mu0t * std::exp(tail_t[static_cast<size_t>(n) + 1]);
  }
  for (Eigen::Index n = 0; n <= n_max; ++n)
    if (!(t.e[n] > 0.0) || !std::isfinite(t.e[n]))
      throw InadmissibleUL("remainder E_n is not positive", n, "E");
  return t;
}

}  // namespace detail

// Closed-form coefficient route.
inline ULFactors ul_factorize(const BirthDeathProcess& p, double x0, double mu0_tilde,
                              Eigen::Index n_max, const SeriesOptions& opt = {}) {
  if (n_max < 1) throw DomainError("ul_factorize needs N >= 1");
  ULAdmissibility rep = ul_admissibility(p, x0, mu0_tilde, opt);
  if (!rep.admissible) throw InadmissibleUL(rep.reason, -1, "interval");
  detail::ULTables tb = detail::ul_tables(p, rep, n_max);

  ULFactors f;
  f.x0 = x0;
  f.mu0_tilde = mu0_tilde;
  f.x.resize(n_max + 1);
  f.y.resize(n_max + 1);
  f.s.resize(n_max + 1);
  f.r.resize(n_max + 1);
  f.u = tb.u.head(n_max + 1);
  f.q.resize(n_max + 1);
  f.t.resize(n_max + 1);
  f.r[0] = std::numeric_limits<double>::quiet_NaN();
  f.q[0] = std::numeric_limits<double>::quiet_NaN();
  for (Eigen::Index n = 0; n <= n_max; ++n) {
    double inv_pi = std::exp(-tb.log_pi[static_cast<size_t>(n)]);
    double xn = tb.e[n] * inv_pi / tb.u[n];
    if (!(xn > 0.0) || !std::isfinite(xn))
      throw InadmissibleUL("coefficient x_n is not positive", n, "x");
    f.x[n] = xn;
    f.y[n] = -((n == 0) ? tb.e_m1 : tb.e[n - 1]) * inv_pi / tb.u[n];
    f.s[n] = (n == 0) ? 1.0 : p.lambda(n - 1) / f.x[n - 1];
    if (n >= 1) {
      f.q[n] = -tb.u[n] / tb.u[n - 1];
      f.r[n] = f.q[n] * f.s[n];
    }
    f.t[n] = f.x[n] + f.y[n];
  }
  return f;
}

// Independent scalar-recursion route, cross-check companion of the closed
// forms: the Riccati-type recursion for q_n, the product recursion for t_n,
// and the first-order recursion for x_n.
inline ULFactors ul_factorize_recursive(const BirthDeathProcess& p, double x0,
                                        double mu0_tilde, Eigen::Index n_max,
                                        const SeriesOptions& = {}) {
  if (n_max < 1) throw DomainError("ul_factorize_recursive needs N >= 1");
  if (!(x0 > 0.0)) throw DomainError("UL factorization needs x0 > 0");
  if (!(mu0_tilde >= 0.0)) throw DomainError("UL factorization needs mu0_tilde >= 0");
  ULFactors f;
  f.x0 = x0;
  f.mu0_tilde = mu0_tilde;
  f.x.resize(n_max + 1);
  f.y.resize(n_max + 1);
  f.s.resize(n_max + 1);
  f.r.resize(n_max + 1);
  f.u.resize(n_max + 1);
  f.q.resize(n_max + 1);
  f.t.resize(n_max + 1);
  f.r[0] = std::numeric_limits<double>::quiet_NaN();
  f.q[0] = std::numeric_limits<double>::quiet_NaN();
  double x0p = x0 + mu0_tilde;
  f.x[0] = x0;
  f.t[0] = -mu0_tilde;
  f.y[0] = -x0p;
  f.s[0] = 1.0;
  f.u[0] = 1.0;
  for (Eigen::Index n = 1; n <= n_max; ++n) {
    double ln1 = p.lambda(n - 1), mn = p.mu(n);
    f.q[n] = (n == 1) ? -1.0 - p.mu0() / p.lambda(0) + x0p / p.lambda(0)
                      : -1.0 - p.mu(n - 1) / ln1 - p.mu(n - 1) / (ln1 * f.q[n - 1]);
    f.t[n] = -f.q[n] * f.t[n - 1];
    double xn = f.t[n] - (mn / (ln1 * f.q[n])) * f.x[n - 1];
    if (!(xn > 0.0) || !std::isfinite(xn))
      throw InadmissibleUL("coefficient x_n is not positive", n, "x");
    f.x[n] = xn;
    f.y[n] = f.t[n] - xn;
    f.s[n] = ln1 / f.x[n - 1];
    f.r[n] = f.q[n] * f.s[n];
    f.u[n] = -f.q[n] * f.u[n - 1];
  }
  return f;
}

// Assemble the two bidiagonal factors as dense N x N matrices.
inline Eigen::MatrixXd ul_upper_matrix(const ULFactors& f, Eigen::Index n) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    m(i, i) = f.y[i];
    if (i + 1 < n) m(i, i + 1) = f.x[i];
  }
  return m;
}

inline Eigen::MatrixXd ul_lower_matrix(const ULFactors& f, Eigen::Index n) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    m(i, i) = f.s[i];
    if (i >= 1) m(i, i - 1) = f.r[i];
  }
  return m;
}

// Darboux transform: C B is the generator of the birth-death process with
//   lambda_tilde_n = s_n x_n,   mu_tilde_n = r_n y_{n-1},
// killing rate mu0_tilde, and birth rate x0 at state 0.  Table-backed to N.
inline BirthDeathProcess ul_darboux(const BirthDeathProcess& p, double x0,
                                    double mu0_tilde, Eigen::Index n_max,
                                    const SeriesOptions& opt = {}) {
  ULFactors f = ul_factorize(p, x0, mu0_tilde, n_max, opt);
  std::vector<double> lam(static_cast<size_t>(n_max) + 1);
  std::vector<double> mu(static_cast<size_t>(n_max));
  for (Eigen::Index n = 0; n <= n_max; ++n)
    lam[static_cast<size_t>(n)] = f.s[n] * f.x[n];
  for (Eigen::Index n = 1; n <= n_max; ++n)
    mu[static_cast<size_t>(n - 1)] = f.r[n] * f.y[n - 1];
  BirthDeathProcess out = make_table(std::move(lam), std::move(mu), mu0_tilde);
  return BirthDeathProcess([out](long n) { return out.lambda(n); },
                           [out](long n) { return out.mu(n); }, mu0_tilde,
                           p.label() + "/darboux-ul");
}

// Polynomial family of the Darboux-transformed process:
// Qtilde_n(x) = r_n Q_{n-1}(x) + s_n Q_n(x), with Qtilde_0 = 1.
inline double ul_transformed_poly(const ULFactors& f, const BirthDeathProcess& p,
                                  long n, double x) {
  if (n == 0) return 1.0;
  PolynomialEvaluator e{&p, PolyFamily::Primary};
  Eigen::ArrayXd qx = eval_family(e, n, x);
  return f.r[n] * qx[n - 1] + f.s[n] * qx[n];
}

// Kernel-sum form of the same family, cross-check companion:
// Qtilde_n(x) = [x0 + mu0_tilde - x sum_{k<n} pi_k u_k Q_k(x)] / E_{n-1}.
inline double ul_transformed_poly_cd(const BirthDeathProcess& p, double x0,
                                     double mu0_tilde, long n, double x,
                                     const SeriesOptions& opt = {}) {
  ULAdmissibility rep = ul_admissibility(p, x0, mu0_tilde, opt);
  if (!rep.admissible) throw InadmissibleUL(rep.reason, -1, "interval");
  long m = std::max<long>(n, 1);
  detail::ULTables tb = detail::ul_tables(p, rep, m);
  if (n == 0) return 1.0;
  PolynomialEvaluator e{&p, PolyFamily::Primary};
  Eigen::ArrayXd qx = eval_family(e, n - 1, x);
  double acc = 0.0;
  for (long k = 0; k < n; ++k)
    acc += std::exp(tb.log_pi[static_cast<size_t>(k)]) * tb.u[k] * qx[k];
  return (tb.x0p - x * acc) / tb.e[n - 1];
}

}  // namespace bdarboux
