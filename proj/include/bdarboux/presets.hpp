#pragma once

// Closed-form spectral measures and transformed-rate formulas for the three
// model families (M/M/1 queue with optional killing, M/M/infinity, linear
// immigration-birth-death).  These are the reference values the generic
// machinery is checked against.

#include <cmath>
#include <functional>

#include "bdarboux/errors.hpp"
#include "bdarboux/process.hpp"
#include "bdarboux/special_functions.hpp"
#include "bdarboux/spectral.hpp"

namespace bdarboux {

// ----- M/M/1 with constant rates and killing rate mu0 at state 0 -----------

inline double mm1_support_lo(double lam, double mu) {
  double d = std::sqrt(lam) - std::sqrt(mu);
  return d * d;
}

inline double mm1_support_hi(double lam, double mu) {
  double d = std::sqrt(lam) + std::sqrt(mu);
  return d * d;
}

// Density sqrt(4 lam mu - (lam + mu - x)^2) / (2 pi [(mu - mu0) x
// + mu0 (lam - mu + mu0)]) on [lo, hi], plus one atom at
// zeta = mu0 (1 - lam/(mu - mu0)) of mass 1 - lam mu/(mu - mu0)^2 when
// lam mu < (mu - mu0)^2.
inline SpectralMeasure mm1_measure(double lam, double mu, double mu0) {
  SpectralMeasure m;
  m.lo = mm1_support_lo(lam, mu);
  m.hi = mm1_support_hi(lam, mu);
  m.sqrt_endpoints = true;
  const double pi = 3.14159265358979323846;
  m.density = [lam, mu, mu0, pi](double x) {
    double disc = 4.0 * lam * mu - (lam + mu - x) * (lam + mu - x);
    if (disc <= 0.0) return 0.0;
    double den = (mu - mu0) * x + mu0 * (lam - mu + mu0);
    return std::sqrt(disc) / (2.0 * pi * den);
  };
  double gap = mu - mu0;
  if (gap != 0.0 && lam * mu < gap * gap) {
    double zeta = mu0 * (1.0 - lam / gap);
    double mass = 1.0 - lam * mu / (gap * gap);
    m.atoms.push_back({zeta, mass});
  }
  return m;
}

// Stieltjes transform B(z) = int psi(dx)/(x - z) for real z outside the
// density support, with the branch fixed by z B(z) -> -1 at infinity.
inline double mm1_stieltjes(double lam, double mu, double mu0, double z) {
  double lo = mm1_support_lo(lam, mu), hi = mm1_support_hi(lam, mu);
  double sqrt_d;
  if (z < lo)
    sqrt_d = std::sqrt((lo - z) * (hi - z));
  else if (z > hi)
    sqrt_d = -std::sqrt((z - lo) * (z - hi));
  else
    throw DomainError("mm1_stieltjes needs z outside the continuous support");
  double den = 2.0 * ((mu - mu0) * z + mu0 * (lam - mu + mu0));
  return (lam - mu + 2.0 * mu0 - z - sqrt_d) / den;
}

// Transformed rates of the lower-upper Darboux transform at mu0_hat = 0,
// written against the smaller of lam/mu and mu/lam so both regimes stay
// stable.
inline double mm1_lu_lambda_hat(double lam, double mu, long n) {
  if (lam == mu) return lam * (n + 2.0) / (n + 1.0);
  bool sub = lam < mu;
  double r = sub ? lam / mu : mu / lam;
  double lead = sub ? mu : lam;
  return lead * (1.0 - std::pow(r, static_cast<double>(n) + 2.0)) /
         (1.0 - std::pow(r, static_cast<double>(n) + 1.0));
}

inline double mm1_lu_mu_hat(double lam, double mu, long n) {
  if (n < 1) throw DomainError("mm1_lu_mu_hat needs n >= 1");
  if (lam == mu) return lam * static_cast<double>(n) / (n + 1.0);
  bool sub = lam < mu;
  double r = sub ? lam / mu : mu / lam;
  double lead = sub ? lam : mu;
  return lead * (1.0 - std::pow(r, static_cast<double>(n))) /
         (1.0 - std::pow(r, static_cast<double>(n) + 1.0));
}

// ----- M/M/infinity -------------------------------------------------------

// Poisson atoms at n mu with mass e^{-a} a^n / n!, a = lam/mu.
inline SpectralMeasure mminf_measure(double lam, double mu) {
  SpectralMeasure m;
  double a = lam / mu;
  m.atom_seq = [a, mu](long n) {
    double log_mass = -a + n * std::log(a) - std::lgamma(n + 1.0);
    return SpectralAtom{n * mu, std::exp(log_mass)};
  };
  return m;
}

// Transformed rates: ratios of incomplete gamma functions, the upper ones at
// mu0_hat = 0 and the lower ones at the admissibility bound
// lam e^a / (e^a - 1).
inline double mminf_lu_lambda_hat(double lam, double mu, long n, bool at_bound) {
  double a = lam / mu;
  double g2 = at_bound ? lower_inc_gamma(n + 2.0, a) : upper_inc_gamma(n + 2.0, a);
  double g1 = at_bound ? lower_inc_gamma(n + 1.0, a) : upper_inc_gamma(n + 1.0, a);
  return mu * g2 / g1;
}

inline double mminf_lu_mu_hat(double lam, double mu, long n, bool at_bound) {
  if (n < 1) throw DomainError("mminf_lu_mu_hat needs n >= 1");
  double a = lam / mu;
  double g0 = at_bound ? lower_inc_gamma(static_cast<double>(n), a)
                       : upper_inc_gamma(static_cast<double>(n), a);
  double g1 = at_bound ? lower_inc_gamma(n + 1.0, a) : upper_inc_gamma(n + 1.0, a);
  return lam * static_cast<double>(n) * g0 / g1;
}

// ----- Linear rates lambda_n = lam (n + beta), mu_n = mu n ----------------

// Three regimes: negative-binomial atoms for lam < mu, shifted geometric
// atoms for lam > mu, a Gamma density for lam = mu (support truncated far
// into the exponential tail).
inline SpectralMeasure linear_measure(double lam, double mu, double beta) {
  SpectralMeasure m;
  if (lam < mu) {
    double rho = lam / mu;
    double step = mu - lam;
    m.atom_seq = [rho, beta, step](long n) {
      double log_mass = beta * std::log1p(-rho) + std::lgamma(beta + n) -
                        std::lgamma(beta) - std::lgamma(n + 1.0) + n * std::log(rho);
      return SpectralAtom{step * n, std::exp(log_mass)};
    };
  } else if (lam > mu) {
    double r = mu / lam;
    double step = lam - mu;
    m.atom_seq = [r, beta, step](long n) {
      double log_mass = beta * std::log1p(-r) + std::lgamma(beta + n) -
                        std::lgamma(beta) - std::lgamma(n + 1.0) + n * std::log(r);
      return SpectralAtom{step * (n + beta), std::exp(log_mass)};
    };
  } else {
    m.lo = 0.0;
    m.hi = lam * (beta + 110.0 + 10.0 * std::sqrt(beta + 1.0));
    double norm = std::lgamma(beta) + beta * std::log(lam);
    m.density = [beta, lam, norm](double x) {
      if (x <= 0.0) return 0.0;
      return std::exp((beta - 1.0) * std::log(x) - x / lam - norm);
    };
  }
  return m;
}

// Closed form of the diagonal coefficient s_n of the lower-upper
// factorization for the linear family, all three regimes, any admissible
// mu0_hat.
inline double linear_lu_s(double lam, double mu, double beta, double mu0_hat, long n) {
  double l0 = lam * beta;
  double c = mu0_hat / l0;
  double log_pi = std::lgamma(beta + n) - std::lgamma(beta) - std::lgamma(n + 1.0) +
                  n * std::log(lam / mu);
  if (lam < mu) {
    double rho = lam / mu;
    double log_s_all = -beta * std::log1p(-rho);  // log of the full sum S
    if (c <= 1.0) {
      double pn = std::exp(log_s_all) * detail::reg_inc_beta(beta, n + 1.0, 1.0 - rho);
      return (c + (1.0 - c) * pn) * std::exp(-log_pi);
    }
    double s_all = std::exp(log_s_all);
    double bound = l0 * s_all / (s_all - 1.0);
    double k_head = (s_all - 1.0) * (bound - mu0_hat) / l0;
    double rn = inc_beta_complement(1.0 - rho, beta, n + 1.0) *
                std::exp(log_s_all - detail::log_beta(beta, n + 1.0));
    return (k_head + (c - 1.0) * rn) * std::exp(-log_pi);
  }
  if (lam > mu) {
    double f = gauss_2f1(1.0, -static_cast<double>(n), 1.0 - beta - n, mu / lam);
    return c * std::exp(-log_pi) + (1.0 - c) * f;
  }
  double pochhammer_ratio = std::exp(std::lgamma(n + 1.0) + std::lgamma(beta) -
                                     std::lgamma(beta + n));
  return mu0_hat * pochhammer_ratio / l0 + (1.0 - c) * (1.0 + n / beta);
}

// Right-endpoint value of mu0_tilde_max / (x0 + mu0_tilde) = 1/(A T) for the
// upper-lower factorization of the linear family with beta = 1, lam > mu.
inline double linear_ul_dilog_bound(double lam, double mu) {
  if (!(lam > mu)) throw DomainError("dilog bound needs lam > mu");
  double lg = std::log1p(-mu / lam);  // log(1 - mu/lam), negative
  double den = lg * lg + 2.0 * dilog(mu / (mu - lam));
  return 2.0 * (lam - mu) * lg / den;
}

}  // namespace bdarboux
