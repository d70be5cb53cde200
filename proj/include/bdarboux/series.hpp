#pragma once

// Convergence verdicts for the positive series that classify a birth-death
// process: A (escape weights), B (potential coefficients), S (killed kernel
// weights) and T (the analogous series of the upper/lower factorization).
//
// The numeric engine is a ratio test: a series is declared finite when the
// running term ratio stays below 1 over a confirmation window and the
// geometric tail bound drops under tolerance; divergent when terms are
// nondecreasing over the window or the partial sum passes a cap.  Anything
// slower in either direction is honestly reported Undetermined.  Preset
// processes carry closed-form rules that settle exactly those slow cases.

#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <string>

#include "bdarboux/ladder.hpp"
#include "bdarboux/process.hpp"

namespace bdarboux {

enum class SeriesKind { Finite, Divergent, Undetermined };

struct SeriesVerdict {
  SeriesKind kind = SeriesKind::Undetermined;
  double value = std::numeric_limits<double>::quiet_NaN();  // partial sum when finite
  double tail_bound = std::numeric_limits<double>::quiet_NaN();
  long terms_used = 0;
  std::string evidence;

  bool finite() const { return kind == SeriesKind::Finite; }
  bool divergent() const { return kind == SeriesKind::Divergent; }
  bool undetermined() const { return kind == SeriesKind::Undetermined; }
};

struct SeriesOptions {
  double tol = 1e-12;
  long max_terms = 100000;
  int window = 20;
  double divergence_cap = 1e15;
  bool use_closed_form = true;
};

// Sum a positive series given its terms in log scale.
inline SeriesVerdict sum_series(const std::function<double(long)>& log_term,
                                const SeriesOptions& opt = {}) {
  const double log_cap = std::log(opt.divergence_cap);
  double log_sum = -std::numeric_limits<double>::infinity();
  double prev = std::numeric_limits<double>::quiet_NaN();
  std::deque<double> ratios;
  int nondecreasing_run = 0;
  SeriesVerdict v;
  for (long k = 0; k < opt.max_terms; ++k) {
    double lt = log_term(k);
    log_sum = log_add_exp(log_sum, lt);
    v.terms_used = k + 1;
    if (log_sum > log_cap) {
      v.kind = SeriesKind::Divergent;
      v.evidence = "partial sum exceeded cap";
      return v;
    }
    if (k >= 1) {
      double r = std::exp(lt - prev);
      nondecreasing_run = (r >= 1.0) ? nondecreasing_run + 1 : 0;
      if (nondecreasing_run >= opt.window) {
        v.kind = SeriesKind::Divergent;
        v.evidence = "terms nondecreasing over confirmation window";
        return v;
      }
      ratios.push_back(r);
      if (static_cast<int>(ratios.size()) > opt.window) ratios.pop_front();
      if (static_cast<int>(ratios.size()) == opt.window) {
        double rmax = 0.0;
        for (double x : ratios) rmax = std::max(rmax, x);
        if (rmax < 1.0) {
          double tail = std::exp(lt) * rmax / (1.0 - rmax);
          if (tail < opt.tol) {
            v.kind = SeriesKind::Finite;
            v.value = std::exp(log_sum);
            v.tail_bound = tail;
            v.evidence = "ratio test, geometric tail bound under tolerance";
            return v;
          }
        }
      }
    }
    prev = lt;
  }
  v.kind = SeriesKind::Undetermined;
  v.evidence = "max_terms reached without verdict";
  return v;
}

namespace detail {

inline SeriesVerdict from_closed_form(const ClosedFormSeries& c) {
  SeriesVerdict v;
  v.kind = c.finite ? SeriesKind::Finite : SeriesKind::Divergent;
  v.value = c.finite ? c.value : std::numeric_limits<double>::quiet_NaN();
  v.tail_bound = c.finite ? 0.0 : std::numeric_limits<double>::quiet_NaN();
  v.terms_used = 0;
  v.evidence = "closed-form rule";
  return v;
}

}  // namespace detail

// A = sum 1/(lambda_n pi_n).  Divergence here is recurrence.
inline SeriesVerdict series_A(const BirthDeathProcess& p, const SeriesOptions& opt = {}) {
  if (opt.use_closed_form && p.hints().a)
    if (auto c = p.hints().a()) return detail::from_closed_form(*c);
  double log_pi = 0.0;
  long n_state = -1;
  auto log_term = [&, log_pi](long n) mutable -> double {
    if (n != n_state + 1) throw DomainError("series term generator is sequential");
    n_state = n;
    if (n > 0) log_pi += std::log(p.lambda(n - 1)) - std::log(p.mu(n));
    return -std::log(p.lambda(n)) - log_pi;
  };
  return sum_series(log_term, opt);
}

// B = sum pi_n.  Finiteness here is positive recurrence (of the conservative
// process) or ergodicity of the return process.
inline SeriesVerdict series_B(const BirthDeathProcess& p, const SeriesOptions& opt = {}) {
  if (opt.use_closed_form && p.hints().b)
    if (auto c = p.hints().b()) return detail::from_closed_form(*c);
  double log_pi = 0.0;
  long n_state = -1;
  auto log_term = [&, log_pi](long n) mutable -> double {
    if (n != n_state + 1) throw DomainError("series term generator is sequential");
    n_state = n;
    if (n > 0) log_pi += std::log(p.lambda(n - 1)) - std::log(p.mu(n));
    return log_pi;
  };
  return sum_series(log_term, opt);
}

// S = sum pi_n Q_n(0)^2, the total kernel weight at the origin.  Strictly
// greater than 1; the lower-factorization bound is finite exactly when S is.
inline SeriesVerdict series_S(const BirthDeathProcess& p, const SeriesOptions& opt = {}) {
  if (opt.use_closed_form && p.hints().s)
    if (auto c = p.hints().s()) return detail::from_closed_form(*c);
  double log_pi = 0.0;
  double a = 0.0;  // sum_{k<n} 1/(lambda_k pi_k)
  long n_state = -1;
  auto log_term = [&, log_pi, a](long n) mutable -> double {
    if (n != n_state + 1) throw DomainError("series term generator is sequential");
    n_state = n;
    if (n > 0) {
      a += std::exp(-std::log(p.lambda(n - 1)) - log_pi);
      log_pi += std::log(p.lambda(n - 1)) - std::log(p.mu(n));
    }
    double q0 = 1.0 + p.mu0() * a;
    return log_pi + 2.0 * std::log(q0);
  };
  return sum_series(log_term, opt);
}

enum class Regime {
  PositiveRecurrent,
  NullRecurrent,
  Transient,
  CertainErgodicAbsorption,
  CertainNonErgodicAbsorption,
  TransientAbsorption,
  Undetermined,
};

inline const char* to_string(Regime r) {
  switch (r) {
    case Regime::PositiveRecurrent: return "PositiveRecurrent";
    case Regime::NullRecurrent: return "NullRecurrent";
    case Regime::Transient: return "Transient";
    case Regime::CertainErgodicAbsorption: return "CertainErgodicAbsorption";
    case Regime::CertainNonErgodicAbsorption: return "CertainNonErgodicAbsorption";
    case Regime::TransientAbsorption: return "TransientAbsorption";
    case Regime::Undetermined: return "Undetermined";
  }
  return "?";
}

struct Classification {
  bool conservative = true;
  Regime regime = Regime::Undetermined;
  SeriesVerdict a;
  SeriesVerdict b;
};

// Regime table.  Conservative: A divergent means recurrent, then B finite
// splits positive from null recurrence; A finite means transient.  Killed:
// the same series decide whether absorption is certain and whether the
// return process is ergodic.
inline Classification classify(const BirthDeathProcess& p, const SeriesOptions& opt = {}) {
  Classification c;
  c.conservative = p.conservative();
  c.a = series_A(p, opt);
  c.b = series_B(p, opt);
  if (c.a.undetermined() || (c.a.divergent() && c.b.undetermined())) {
    c.regime = Regime::Undetermined;
    return c;
  }
  if (c.conservative) {
    if (c.a.finite())
      c.regime = Regime::Transient;
    else
      c.regime = c.b.finite() ? Regime::PositiveRecurrent : Regime::NullRecurrent;
  } else {
    if (c.a.finite())
      c.regime = Regime::TransientAbsorption;
    else
      c.regime = c.b.finite() ? Regime::CertainErgodicAbsorption
                              : Regime::CertainNonErgodicAbsorption;
  }
  return c;
}

}  // namespace bdarboux
