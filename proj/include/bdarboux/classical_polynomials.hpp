#pragma once

// Classical orthogonal polynomial families by their three-term recurrences.
// These serve as independent oracles for the recurrence engine: specific
// birth-death families reduce to them under an affine change of variable.

#include <cmath>

#include "bdarboux/errors.hpp"

namespace bdarboux {

inline double chebyshev_u(long n, double x) {
  if (n < 0) return 0.0;
  double pm = 0.0, p = 1.0;
  for (long k = 0; k < n; ++k) {
    double next = 2.0 * x * p - pm;
    pm = p;
    p = next;
  }
  return p;
}

inline double chebyshev_t(long n, double x) {
  if (n < 0) throw DomainError("chebyshev_t needs n >= 0");
  if (n == 0) return 1.0;
  double pm = 1.0, p = x;
  for (long k = 1; k < n; ++k) {
    double next = 2.0 * x * p - pm;
    pm = p;
    p = next;
  }
  return p;
}

// Charlier family normalized to C_n(0) = 1:
//   a C_{n+1} = (a + n - x) C_n - n C_{n-1}.
inline double charlier(long n, double x, double a) {
  if (n < 0) throw DomainError("charlier needs n >= 0");
  if (!(a > 0.0)) throw DomainError("charlier needs a > 0");
  double pm = 0.0, p = 1.0;
  for (long k = 0; k < n; ++k) {
    double next = ((a + k - x) * p - k * pm) / a;
    pm = p;
    p = next;
  }
  return p;
}

// Meixner family normalized to M_n(0) = 1:
//   c (b + n) M_{n+1} = [(c - 1) x + n + (n + b) c] M_n - n M_{n-1}.
inline double meixner(long n, double x, double b, double c) {
  if (n < 0) throw DomainError("meixner needs n >= 0");
  if (!(b > 0.0) || !(c > 0.0) || !(c < 1.0))
    throw DomainError("meixner needs b > 0 and 0 < c < 1");
  double pm = 0.0, p = 1.0;
  for (long k = 0; k < n; ++k) {
    double next = (((c - 1.0) * x + k + (k + b) * c) * p - k * pm) / (c * (b + k));
    pm = p;
    p = next;
  }
  return p;
}

// Laguerre polynomials L_n^{(alpha)}:
//   (n + 1) L_{n+1} = (2n + 1 + alpha - x) L_n - (n + alpha) L_{n-1}.
inline double laguerre(long n, double x, double alpha) {
  if (n < 0) throw DomainError("laguerre needs n >= 0");
  double pm = 0.0, p = 1.0;
  for (long k = 0; k < n; ++k) {
    double next = ((2.0 * k + 1.0 + alpha - x) * p - (k + alpha) * pm) / (k + 1.0);
    pm = p;
    p = next;
  }
  return p;
}

}  // namespace bdarboux
