#pragma once

// Spectral-measure side of the factorizations.  A measure is an absolutely
// continuous density on an interval plus isolated atoms plus an optional
// infinite atom sequence.  The lower-upper Darboux transform multiplies the
// measure by x (Christoffel), the upper-lower one divides by x and places an
// atom at the origin (Geronimus); both appear here in the normalizations
// that keep total mass 1.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "bdarboux/errors.hpp"
#include "bdarboux/ladder.hpp"
#include "bdarboux/polynomials.hpp"
#include "bdarboux/process.hpp"
#include "bdarboux/quadrature.hpp"
#include "bdarboux/series.hpp"

namespace bdarboux {

struct SpectralAtom {
  double location = 0.0;
  double mass = 0.0;
};

struct SpectralMeasure {
  std::function<double(double)> density;  // null when purely discrete
  double lo = 0.0, hi = 0.0;              // support of the density part
  bool sqrt_endpoints = false;            // density has 1/sqrt endpoint behavior
  std::vector<SpectralAtom> atoms;        // finite isolated atoms
  std::function<SpectralAtom(long)> atom_seq;  // null unless infinitely many
};

namespace detail {

inline double atom_seq_sum(const std::function<SpectralAtom(long)>& seq,
                           const std::function<double(double)>& f) {
  double acc = 0.0;
  int quiet = 0;
  for (long n = 0; n < 200000; ++n) {
    SpectralAtom a = seq(n);
    double term = a.mass * f(a.location);
    acc += term;
    bool small = std::abs(term) <= 1e-15 * (std::abs(acc) + 1e-300);
    quiet = small ? quiet + 1 : 0;
    if (quiet >= 12) return acc;
  }
  throw DomainError("atom sequence sum did not settle within the term budget");
}

}  // namespace detail

inline double measure_integral(const SpectralMeasure& m,
                               const std::function<double(double)>& f,
                               const QuadratureOptions& qopt = {}) {
  double v = 0.0;
  if (m.density) {
    auto g = [&](double x) { return m.density(x) * f(x); };
    QuadratureResult r = m.sqrt_endpoints ? integrate_sin_sq(g, m.lo, m.hi, qopt)
                                          : integrate(g, m.lo, m.hi, qopt);
    v += r.value;
  }
  for (const SpectralAtom& a : m.atoms) v += a.mass * f(a.location);
  if (m.atom_seq) v += detail::atom_seq_sum(m.atom_seq, f);
  return v;
}

inline double measure_total_mass(const SpectralMeasure& m,
                                 const QuadratureOptions& qopt = {}) {
  return measure_integral(m, [](double) { return 1.0; }, qopt);
}

inline double moment(const SpectralMeasure& m, int k,
                     const QuadratureOptions& qopt = {}) {
  return measure_integral(m, [k](double x) { return std::pow(x, k); }, qopt);
}

inline double inverse_moment(const SpectralMeasure& m,
                             const QuadratureOptions& qopt = {}) {
  for (const SpectralAtom& a : m.atoms)
    if (a.location == 0.0 && a.mass > 0.0)
      throw DivergentMoment("measure has an atom at the origin, the inverse moment diverges");
  if (m.atom_seq) {
    SpectralAtom a0 = m.atom_seq(0);
    if (a0.location == 0.0 && a0.mass > 0.0)
      throw DivergentMoment("measure has an atom at the origin, the inverse moment diverges");
  }
  return measure_integral(m, [](double x) { return 1.0 / x; }, qopt);
}

// Measure of the lower-upper Darboux transform: x psi(dx) / (lambda_0 + mu_0).
// Independent of the transformed killing rate; an atom at the origin is
// annihilated.
inline SpectralMeasure christoffel_transform(const BirthDeathProcess& p,
                                             const SpectralMeasure& psi) {
  double norm = p.lambda(0) + p.mu0();
  SpectralMeasure out;
  if (psi.density) {
    auto base = psi.density;
    out.density = [base, norm](double x) { return x * base(x) / norm; };
    out.lo = psi.lo;
    out.hi = psi.hi;
    out.sqrt_endpoints = psi.sqrt_endpoints;
  }
  for (const SpectralAtom& a : psi.atoms)
    if (a.location != 0.0)
      out.atoms.push_back({a.location, a.location * a.mass / norm});
  if (psi.atom_seq) {
    auto base = psi.atom_seq;
    out.atom_seq = [base, norm](long n) {
      SpectralAtom a = base(n);
      return SpectralAtom{a.location, a.location * a.mass / norm};
    };
  }
  return out;
}

struct GeronimusReport {
  double m_minus_1;     // inverse moment of the original measure
  double mass_at_zero;  // raw M = 1 - (x0 + mu0_tilde) m_{-1}, may round below 0
  double scale;         // natural size of the cancellation, for tolerance checks
};

// Mass at the origin of the upper-lower transformed measure, with the inverse
// moment m_{-1} = A / (1 + mu_0 A) taken from the escape series.  M >= 0
// exactly on the admissible parameter range, vanishing at its right endpoint.
inline GeronimusReport geronimus_report(const BirthDeathProcess& p, double x0,
                                        double mu0_tilde,
                                        const SeriesOptions& opt = {}) {
  double x0p = x0 + mu0_tilde;
  SeriesVerdict a = series_A(p, opt);
  if (a.undetermined()) throw UndeterminedSeries("escape weight series A");
  double m_inv;
  if (a.finite())
    m_inv = a.value / (1.0 + p.mu0() * a.value);
  else if (p.conservative())
    throw ConservativeRecurrentBlocked();
  else
    m_inv = 1.0 / p.mu0();
  return GeronimusReport{m_inv, 1.0 - x0p * m_inv, std::max(1.0, x0p * m_inv)};
}

// Measure of the upper-lower Darboux transform:
//   (x0 + mu0_tilde) psi(dx) / x  +  M delta_0.
inline SpectralMeasure geronimus_transform(const BirthDeathProcess& p,
                                           const SpectralMeasure& psi, double x0,
                                           double mu0_tilde,
                                           const SeriesOptions& opt = {}) {
  double x0p = x0 + mu0_tilde;
  for (const SpectralAtom& a : psi.atoms)
    if (a.location == 0.0 && a.mass > 0.0)
      throw DivergentMoment("measure has an atom at the origin, the inverse moment diverges");

  GeronimusReport rep = geronimus_report(p, x0, mu0_tilde, opt);
  double mass0 = rep.mass_at_zero;
  if (mass0 < -1e-12 * rep.scale)
    throw InadmissibleUL("transformed measure would carry negative mass at the origin", -1, "M");
  mass0 = std::max(mass0, 0.0);

  SpectralMeasure out;
  if (psi.density) {
    auto base = psi.density;
    out.density = [base, x0p](double x) { return x0p * base(x) / x; };
    out.lo = psi.lo;
    out.hi = psi.hi;
    out.sqrt_endpoints = psi.sqrt_endpoints;
  }
  for (const SpectralAtom& atom : psi.atoms)
    if (atom.location != 0.0)
      out.atoms.push_back({atom.location, x0p * atom.mass / atom.location});
  if (mass0 > 0.0) out.atoms.push_back({0.0, mass0});
  if (psi.atom_seq) {
    auto base = psi.atom_seq;
    out.atom_seq = [base, x0p](long n) {
      SpectralAtom atom = base(n);
      if (atom.location == 0.0) return SpectralAtom{0.0, 0.0};
      return SpectralAtom{atom.location, x0p * atom.mass / atom.location};
    };
  }
  return out;
}

// Largest deviation of sqrt(pi_i pi_j) int Q_i Q_j dpsi from the identity,
// over 0 <= i, j <= n_max.
inline double orthogonality_residual(const SpectralMeasure& m,
                                     const BirthDeathProcess& p, long n_max,
                                     const QuadratureOptions& qopt = {}) {
  LogWeightLadder l = build_ladder(p, n_max);
  PolynomialEvaluator e{&p, PolyFamily::Primary};
  double worst = 0.0;
  for (long i = 0; i <= n_max; ++i) {
    for (long j = i; j <= n_max; ++j) {
      double v = measure_integral(
          m,
          [&](double x) {
            Eigen::ArrayXd q = eval_family(e, j, x);
            return q[i] * q[j];
          },
          qopt);
      double scaled = std::exp(0.5 * (l.log_pi[i] + l.log_pi[j])) * v;
      double dev = std::abs(scaled - (i == j ? 1.0 : 0.0));
      worst = std::max(worst, dev);
    }
  }
  return worst;
}

// Transition probability by spectral representation:
//   P_ij(t) = pi_j int e^{-xt} Q_i(x) Q_j(x) psi(dx).
inline double km_transition(const SpectralMeasure& m, const BirthDeathProcess& p,
                            long i, long j, double t,
                            const QuadratureOptions& qopt = {}) {
  if (i < 0 || j < 0) throw DomainError("km_transition needs i, j >= 0");
  long top = std::max(i, j);
  LogWeightLadder l = build_ladder(p, top);
  PolynomialEvaluator e{&p, PolyFamily::Primary};
  double v = measure_integral(
      m,
      [&](double x) {
        Eigen::ArrayXd q = eval_family(e, top, x);
        return std::exp(-x * t) * q[i] * q[j];
      },
      qopt);
  return std::clamp(std::exp(l.log_pi[j]) * v, 0.0, 1.0);
}

}  // namespace bdarboux
