#pragma once

// Adaptive Gauss-Kronrod quadrature (7-15 pair) with greedy bisection of the
// segment carrying the largest error estimate.  A variant with the
// trigonometric substitution x = a + (b-a) sin^2(theta) integrates densities
// with inverse-square-root endpoint behavior without ever sampling the
// endpoints.

#include <cmath>
#include <functional>
#include <queue>
#include <vector>

#include "bdarboux/errors.hpp"

namespace bdarboux {

struct QuadratureOptions {
  double abs_tol = 1e-12;
  double rel_tol = 1e-10;
  int max_segments = 512;
};

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
  int segments = 0;
};

namespace detail {

struct GK15 {
  double integral;  // Kronrod 15-point value
  double error;     // |K15 - G7|
};

inline GK15 gk15(const std::function<double(double)>& f, double a, double b) {
  static const double xgk[8] = {
      0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
      0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
      0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
      0.207784955007898467600689403773245, 0.0};
  static const double wgk[8] = {
      0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
      0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
      0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
      0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
  static const double wg[4] = {
      0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
      0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

  double c = 0.5 * (a + b), h = 0.5 * (b - a);
  double fc = f(c);
  double k = wgk[7] * fc;
  double g = wg[3] * fc;
  for (int j = 0; j < 7; ++j) {
    double fs = f(c - h * xgk[j]) + f(c + h * xgk[j]);
    k += wgk[j] * fs;
    if (j % 2 == 1) g += wg[j / 2] * fs;
  }
  return {k * h, std::abs((k - g) * h)};
}

struct Segment {
  double error, a, b, value;
  bool operator<(const Segment& o) const { return error < o.error; }
};

}  // namespace detail

inline QuadratureResult integrate(const std::function<double(double)>& f, double a,
                                  double b, const QuadratureOptions& opt = {}) {
  if (!(a < b)) throw DomainError("integrate needs a < b");
  std::priority_queue<detail::Segment> heap;
  detail::GK15 first = detail::gk15(f, a, b);
  heap.push({first.error, a, b, first.integral});
  double total = first.integral, total_err = first.error;
  int n = 1;
  while (n < opt.max_segments &&
         total_err > std::max(opt.abs_tol, opt.rel_tol * std::abs(total))) {
    detail::Segment worst = heap.top();
    heap.pop();
    double mid = 0.5 * (worst.a + worst.b);
    detail::GK15 left = detail::gk15(f, worst.a, mid);
    detail::GK15 right = detail::gk15(f, mid, worst.b);
    total += left.integral + right.integral - worst.value;
    total_err += left.error + right.error - worst.error;
    heap.push({left.error, worst.a, mid, left.integral});
    heap.push({right.error, mid, worst.b, right.integral});
    ++n;
  }
  return {total, total_err, n};
}

// Integral of g over [a, b] through x = a + (b-a) sin^2(theta); the Jacobian
// (b-a) sin(2 theta) tames inverse-square-root singularities at either
// endpoint, and no node ever touches x = a or x = b.
inline QuadratureResult integrate_sin_sq(const std::function<double(double)>& g,
                                         double a, double b,
                                         const QuadratureOptions& opt = {}) {
  if (!(a < b)) throw DomainError("integrate_sin_sq needs a < b");
  double w = b - a;
  auto h = [&, a, w](double theta) {
    double s = std::sin(theta);
    double x = a + w * s * s;
    return g(x) * w * std::sin(2.0 * theta);
  };
  return integrate(h, 0.0, std::asin(1.0), opt);
}

}  // namespace bdarboux
