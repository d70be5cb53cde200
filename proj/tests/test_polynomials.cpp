#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "bdarboux/classical_polynomials.hpp"
#include "bdarboux/factor_lu.hpp"
#include "bdarboux/factor_ul.hpp"
#include "bdarboux/polynomials.hpp"
#include "bdarboux/presets.hpp"
#include "bdarboux/process.hpp"
#include "doctest.h"

using namespace bdarboux;

namespace {

double rel(double got, double want) {
  return std::abs(got - want) / (std::abs(want) + 1.0);
}

// Bracketed bisection roots of x -> eval(e, n, x) on [lo, hi].
std::vector<double> poly_zeros(const PolynomialEvaluator& e, long n, double lo, double hi) {
  const int grid = 4000;
  std::vector<double> zeros;
  double prev_x = lo, prev_v = eval(e, n, lo);
  for (int k = 1; k <= grid; ++k) {
    double x = lo + (hi - lo) * k / grid;
    double v = eval(e, n, x);
    if (prev_v == 0.0) zeros.push_back(prev_x);
    if (prev_v * v < 0.0) {
      double a = prev_x, b = x, fa = prev_v;
      for (int it = 0; it < 80; ++it) {
        double m = 0.5 * (a + b), fm = eval(e, n, m);
        if (fa * fm <= 0.0)
          b = m;
        else
          a = m, fa = fm;
      }
      zeros.push_back(0.5 * (a + b));
    }
    prev_x = x;
    prev_v = v;
  }
  return zeros;
}

}  // namespace

TEST_CASE("recurrence basics") {
  BirthDeathProcess p = make_mm1(1.0, 2.0, 0.0);
  PolynomialEvaluator e{&p, PolyFamily::Primary};
  CHECK(eval(e, 0, 0.37) == 1.0);
  CHECK(eval(e, 0, -5.0) == 1.0);
  CHECK(rel(eval(e, 1, 3.0), -2.0) < 1e-15);
  CHECK(eval(e, -1, 2.0) == 0.0);

  PolynomialEvaluator a{&p, PolyFamily::Associated};
  CHECK(eval(a, 0, 1.3) == 0.0);
  CHECK(rel(eval(a, 1, 0.9), -1.0) < 1e-15);

  Eigen::ArrayXd fam = eval_family(e, 6, 0.5);
  for (long n = 0; n <= 6; ++n) CHECK(fam[n] == eval(e, n, 0.5));

  CHECK_THROWS_AS(eval(e, 201, 1.0), DomainError);
  CHECK_NOTHROW(eval(e, 200, 1.0));
}

TEST_CASE("values at the origin match the ladder closed forms") {
  BirthDeathProcess p = make_mm1(1.0, 2.0, 1.0);
  PolynomialEvaluator ep{&p, PolyFamily::Primary};
  PolynomialEvaluator ea{&p, PolyFamily::Associated};
  Eigen::ArrayXd qp = eval_family(ep, 100, 0.0);
  Eigen::ArrayXd qa = eval_family(ea, 100, 0.0);
  for (long n = 0; n <= 100; ++n) {
    double wp = q_at_zero(p, n);
    double wa = q_assoc_at_zero(p, n);
    CHECK(std::abs(qp[n] - wp) <= 1e-12 * std::abs(wp));
    CHECK(std::abs(qa[n] - wa) <= 1e-12 * (std::abs(wa) + 1e-30));
  }

  std::vector<double> lam = {0.7, 2.3, 1.1, 0.43, 5.0, 1.9, 0.86, 3.3};
  std::vector<double> mu = {1.3, 0.9, 2.6, 1.7, 0.31, 4.2, 1.15};
  BirthDeathProcess t = make_table(lam, mu, 0.8);
  PolynomialEvaluator et{&t, PolyFamily::Primary};
  for (long n = 0; n <= 7; ++n)
    CHECK(rel(eval(et, n, 0.0), q_at_zero(t, n)) < 1e-12);
}

TEST_CASE("kernel identity") {
  BirthDeathProcess p = make_mm1(1.0, 2.0, 0.0);
  CHECK(cd_residual(p, 5, 0.3, 1.7) <= 1e-10);
  CHECK(cd_residual(p, 0, 0.4, 2.2) <= 1e-14);
  BirthDeathProcess k = make_mm1(1.0, 2.0, 1.0);
  CHECK(cd_residual(k, 10, 0.5, 2.5) <= 1e-9);
  CHECK_THROWS_AS(cd_residual(p, 3, 1.0, 1.0), DomainError);
}

TEST_CASE("kernel identity across presets at random points") {
  std::mt19937 gen(20240517);
  struct Row {
    BirthDeathProcess p;
    double hi;
  };
  std::vector<Row> rows;
  rows.push_back({make_mm1(1.0, 2.0, 0.0), mm1_support_hi(1.0, 2.0)});
  rows.push_back({make_mm1(2.0, 1.0, 0.0), mm1_support_hi(2.0, 1.0)});
  rows.push_back({make_mm1(1.0, 2.0, 1.0), mm1_support_hi(1.0, 2.0)});
  rows.push_back({make_mm_inf(1.0, 1.0), 6.0});
  rows.push_back({make_linear(1.0, 1.0, 3.0), 8.0});
  rows.push_back({make_linear(1.0, 2.0, 2.5), 8.0});
  rows.push_back({make_linear(2.0, 1.0, 1.0), 8.0});
  std::uniform_int_distribution<long> deg(0, 50);
  for (const Row& row : rows) {
    std::uniform_real_distribution<double> u(0.0, row.hi);
    for (int it = 0; it < 100; ++it) {
      double x = u(gen), y = u(gen);
      if (x == y) y += 1e-3;
      long n = deg(gen);
      CHECK(cd_residual(row.p, n, x, y) <= 1e-9);
    }
  }
}

TEST_CASE("mixed kernel identity") {
  BirthDeathProcess p = make_mm_inf(1.0, 1.0);
  CHECK(cd_mixed_residual(p, 0, 0.8, 1.9) <= 1e-14);
  std::mt19937 gen(7);
  std::uniform_real_distribution<double> u(0.0, 6.0);
  for (int it = 0; it < 40; ++it)
    CHECK(cd_mixed_residual(p, 8, u(gen), u(gen)) <= 1e-9);

  // the y = 0 slice couples the boundary values of the two families
  BirthDeathProcess k = make_mm1(1.0, 2.0, 1.0);
  for (long n : {1L, 4L, 9L, 20L})
    CHECK(cd_mixed_residual(k, n, 0.7, 0.0) <= 1e-9);
}

TEST_CASE("zeros stay inside the essential support") {
  // pure-density measure, so every zero sits strictly between the endpoints
  BirthDeathProcess p = make_mm1(2.0, 1.0, 0.0);
  PolynomialEvaluator e{&p, PolyFamily::Primary};
  double lo = mm1_support_lo(2.0, 1.0), hi = mm1_support_hi(2.0, 1.0);
  std::vector<double> prev;
  for (long n = 1; n <= 10; ++n) {
    std::vector<double> z = poly_zeros(e, n, lo - 0.05, hi + 0.05);
    REQUIRE(static_cast<long>(z.size()) == n);
    for (double zi : z) {
      CHECK(zi > lo);
      CHECK(zi < hi);
    }
    // interlacing with the previous degree
    for (size_t k = 0; k < prev.size(); ++k) {
      CHECK(z[k] < prev[k]);
      CHECK(prev[k] < z[k + 1]);
    }
    prev = z;
  }
}

TEST_CASE("killed random walk reduces to a Chebyshev combination") {
  double lam = 1.3, mu = 2.4, mu0 = 0.7;
  BirthDeathProcess p = make_mm1(lam, mu, mu0);
  PolynomialEvaluator e{&p, PolyFamily::Primary};
  std::mt19937 gen(11);
  std::uniform_real_distribution<double> u(mm1_support_lo(lam, mu), mm1_support_hi(lam, mu));
  for (int it = 0; it < 20; ++it) {
    double x = u(gen);
    double y = (lam + mu - x) / (2.0 * std::sqrt(lam * mu));
    for (long n = 0; n <= 30; ++n) {
      double closed = std::pow(mu / lam, 0.5 * n) *
                      (chebyshev_u(n, y) + (mu0 - mu) / lam * std::sqrt(lam / mu) *
                                               chebyshev_u(n - 1, y));
      CHECK(rel(eval(e, n, x), closed) < 1e-9);
    }
  }
}

TEST_CASE("quadratic rates reduce to Charlier") {
  double lam = 1.7, mu = 1.3;
  BirthDeathProcess p = make_mm_inf(lam, mu);
  PolynomialEvaluator e{&p, PolyFamily::Primary};
  std::mt19937 gen(13);
  std::uniform_real_distribution<double> u(0.0, 30.0);
  for (int it = 0; it < 20; ++it) {
    double x = u(gen);
    for (long n = 0; n <= 40; ++n)
      CHECK(rel(eval(e, n, x), charlier(n, x / mu, lam / mu)) < 1e-9);
  }
}

TEST_CASE("linear rates reduce to Meixner, subcritical side") {
  double lam = 1.0, mu = 2.0, beta = 2.5;
  BirthDeathProcess p = make_linear(lam, mu, beta);
  PolynomialEvaluator e{&p, PolyFamily::Primary};
  std::mt19937 gen(17);
  std::uniform_real_distribution<double> u(0.0, 20.0);
  for (int it = 0; it < 20; ++it) {
    double x = u(gen);
    for (long n = 0; n <= 40; ++n)
      CHECK(rel(eval(e, n, x), meixner(n, x / (mu - lam), beta, lam / mu)) < 1e-9);
  }
}

TEST_CASE("linear rates reduce to Meixner, supercritical side") {
  double lam = 2.0, mu = 1.0, beta = 2.5;
  BirthDeathProcess p = make_linear(lam, mu, beta);
  PolynomialEvaluator e{&p, PolyFamily::Primary};
  std::mt19937 gen(19);
  std::uniform_real_distribution<double> u(0.0, 20.0);
  for (int it = 0; it < 20; ++it) {
    double x = u(gen);
    for (long n = 0; n <= 40; ++n) {
      double closed = std::pow(mu / lam, static_cast<double>(n)) *
                      meixner(n, x / (lam - mu) - beta, beta, mu / lam);
      CHECK(rel(eval(e, n, x), closed) < 1e-9);
    }
  }
}

TEST_CASE("critical linear rates reduce to Laguerre") {
  double lam = 1.5, beta = 2.25;
  BirthDeathProcess p = make_linear(lam, lam, beta);
  PolynomialEvaluator e{&p, PolyFamily::Primary};
  std::mt19937 gen(23);
  std::uniform_real_distribution<double> u(0.0, 25.0);
  for (int it = 0; it < 20; ++it) {
    double x = u(gen);
    for (long n = 0; n <= 40; ++n) {
      double norm = std::exp(std::lgamma(n + 1.0) + std::lgamma(beta) -
                             std::lgamma(n + beta));
      CHECK(rel(eval(e, n, x), norm * laguerre(n, x / lam, beta - 1.0)) < 1e-9);
    }
  }
}

TEST_CASE("transformed family, lower-upper side") {
  double lam = 1.0, mu = 2.0, mu0_hat = 0.8;
  BirthDeathProcess p = make_mm1(lam, mu, 0.0);
  LUFactors f = lu_factorize(p, mu0_hat, 30);
  std::mt19937 gen(29);
  std::uniform_real_distribution<double> u(mm1_support_lo(lam, mu), mm1_support_hi(lam, mu));
  for (int it = 0; it < 12; ++it) {
    double x = u(gen);
    double y = (lam + mu - x) / (2.0 * std::sqrt(lam * mu));
    for (long n = 0; n <= 25; ++n) {
      double kernel = lu_transformed_poly(p, mu0_hat, n, x);
      double ratio = lu_transformed_poly_ratio(f, p, n, x);
      CHECK(rel(kernel, ratio) < 1e-10);
      double den = std::pow(mu, n + 1.0) - std::pow(lam, n + 1.0) -
                   mu0_hat * (std::pow(mu, static_cast<double>(n)) -
                              std::pow(lam, static_cast<double>(n)));
      double closed = (mu - lam) * std::pow(lam, static_cast<double>(n)) *
                      std::pow(mu / lam, 0.5 * n) * chebyshev_u(n, y) / den;
      CHECK(rel(kernel, closed) < 1e-9);
    }
  }
  CHECK_THROWS_AS(lu_transformed_poly_ratio(f, p, 3, 0.0), DomainError);
}

TEST_CASE("transformed family, upper-lower side") {
  BirthDeathProcess p = make_mm1(2.0, 1.0, 0.0);
  PolynomialEvaluator e{&p, PolyFamily::Primary};

  // interior point of the parameter interval
  ULFactors f = ul_factorize(p, 0.5, 0.0, 30);
  std::mt19937 gen(31);
  std::uniform_real_distribution<double> u(mm1_support_lo(2.0, 1.0), mm1_support_hi(2.0, 1.0));
  for (int it = 0; it < 12; ++it) {
    double x = u(gen);
    for (long n = 0; n <= 25; ++n) {
      double direct = ul_transformed_poly(f, p, n, x);
      double kernel = ul_transformed_poly_cd(p, 0.5, 0.0, n, x);
      CHECK(rel(direct, kernel) < 1e-10);
    }
  }

  // right endpoint: the transformed family collapses to 2 Q_n - Q_{n-1}
  ULFactors g = ul_factorize(p, 1.0, 0.0, 30);
  for (int it = 0; it < 12; ++it) {
    double x = u(gen);
    Eigen::ArrayXd q = eval_family(e, 25, x);
    for (long n = 1; n <= 25; ++n) {
      double closed = 2.0 * q[n] - q[n - 1];
      CHECK(rel(ul_transformed_poly(g, p, n, x), closed) < 1e-10);
    }
  }
  CHECK(ul_transformed_poly(g, p, 0, 0.9) == 1.0);

  // with transformed killing switched on, along the admissible line
  ULFactors h = ul_factorize(p, 0.75, 0.25, 30);
  for (int it = 0; it < 8; ++it) {
    double x = u(gen);
    for (long n = 0; n <= 20; ++n)
      CHECK(rel(ul_transformed_poly(h, p, n, x),
                ul_transformed_poly_cd(p, 0.75, 0.25, n, x)) < 1e-10);
  }
}
