#include <cmath>
#include <vector>

#include "bdarboux/factor_ul.hpp"
#include "bdarboux/ladder.hpp"
#include "bdarboux/process.hpp"
#include "bdarboux/series.hpp"
#include "doctest.h"

using namespace bdarboux;

namespace {

double rel(double got, double want) {
  return std::abs(got - want) / std::max(1.0, std::abs(want));
}

// Rate table copied from a preset, dropping its closed-form hints so the
// numeric series engine has to earn every verdict itself.
BirthDeathProcess table_clone(const BirthDeathProcess& p, long n, double mu0) {
  std::vector<double> lam, mu;
  for (long k = 0; k < n; ++k) lam.push_back(p.lambda(k));
  for (long k = 1; k <= n; ++k) mu.push_back(p.mu(k));
  return make_table(std::move(lam), std::move(mu), mu0);
}

struct GridPoint {
  double x0;
  double m0;
};

// The admissible sample points used throughout: interior x0 values at
// mu0_tilde = 0 plus a sweep along the line x0 + mu0_tilde = upper limit.
const std::vector<GridPoint> kGridMm1Transient = {
    {0.1, 0.0},   {0.25, 0.0},  {0.5, 0.0},    {0.75, 0.0},  {1.0, 0.0},
    {0.875, 0.125}, {0.75, 0.25}, {0.625, 0.375}, {0.5, 0.5}};
const std::vector<GridPoint> kGridMm1Killed = {
    {0.2, 0.0},   {0.4, 0.0},   {0.6, 0.0},    {0.8, 0.0},   {1.0, 0.0},
    {0.875, 0.125}, {0.75, 0.25}, {0.625, 0.375}, {0.5, 0.5}};
const std::vector<GridPoint> kGridLinear = {
    {0.4, 0.0},  {0.8, 0.0},  {1.2, 0.0},  {1.6, 0.0},  {2.0, 0.0},
    {1.75, 0.25}, {1.5, 0.5},  {1.25, 0.75}, {1.0, 1.0}};

void check_structure(const BirthDeathProcess& p, const ULFactors& f) {
  Eigen::Index n_max = f.level();
  CHECK(f.s[0] == 1.0);
  CHECK(f.u[0] == 1.0);
  CHECK(rel(f.x[0], f.x0) <= 1e-13);
  CHECK(rel(f.y[0], -(f.x0 + f.mu0_tilde)) <= 1e-13);
  CHECK(f.t[0] == f.x[0] + f.y[0]);
  CHECK(std::isnan(f.r[0]));
  CHECK(std::isnan(f.q[0]));
  for (Eigen::Index n = 0; n <= n_max; ++n) {
    CHECK(f.x[n] > 0.0);
    CHECK(f.u[n] > 0.0);
    CHECK(f.y[n] < 0.0);
    CHECK(f.s[n] > 0.0);
    CHECK(f.t[n] == f.x[n] + f.y[n]);
    if (n >= 1) {
      CHECK(f.q[n] < 0.0);
      CHECK(f.r[n] < 0.0);
      CHECK(rel(f.s[n], p.lambda(n - 1) / f.x[n - 1]) <= 1e-12);
      CHECK(rel(f.q[n], -f.u[n] / f.u[n - 1]) <= 1e-12);
      CHECK(rel(f.r[n], f.q[n] * f.s[n]) <= 1e-12);
      CHECK(rel(f.y[n] * f.r[n], p.mu(n)) <= 1e-12);
    }
    if (n < n_max) {
      CHECK(rel(f.x[n] * f.s[n + 1], p.lambda(n)) <= 1e-12);
      double lm = p.lambda(n) + (n == 0 ? p.mu0() : p.mu(n));
      CHECK(rel(f.y[n] * f.s[n] + f.x[n] * f.r[n + 1], -lm) <= 1e-12);
    }
  }
}

void check_products(const BirthDeathProcess& p, const GridPoint& g, Eigen::Index n_max) {
  ULFactors f = ul_factorize(p, g.x0, g.m0, n_max);
  Eigen::Index n = n_max + 1;
  Eigen::MatrixXd upper = ul_upper_matrix(f, n);
  Eigen::MatrixXd lower = ul_lower_matrix(f, n);
  Eigen::MatrixXd gen = truncated_generator(p, n);
  double scale = gen.cwiseAbs().maxCoeff();

  // U L reproduces the generator on every row the truncation leaves intact.
  Eigen::MatrixXd diff = gen - upper * lower;
  CHECK(diff.topRows(n - 1).cwiseAbs().maxCoeff() <= 1e-12 * scale);

  // The swapped product is the generator of the Darboux-transformed process,
  // including the last diagonal entry: s_n t_n + r_n t_{n-1} = 0 exactly.
  BirthDeathProcess d = ul_darboux(p, g.x0, g.m0, n_max);
  Eigen::MatrixXd swapped = lower * upper;
  Eigen::MatrixXd tgen = truncated_generator(d, n);
  double tscale = tgen.cwiseAbs().maxCoeff();
  CHECK((tgen - swapped).cwiseAbs().maxCoeff() <= 1e-12 * std::max(scale, tscale));

  Eigen::VectorXd row_sums = swapped.rowwise().sum();
  CHECK(std::abs(row_sums[0] + g.m0) <= 1e-12 * std::max(1.0, tscale));
  for (Eigen::Index i = 1; i < n - 1; ++i)
    CHECK(std::abs(row_sums[i]) <= 1e-12 * std::max(1.0, tscale));
}

void check_routes(const BirthDeathProcess& p, const GridPoint& g, Eigen::Index n_max,
                  double tol) {
  ULFactors f = ul_factorize(p, g.x0, g.m0, n_max);
  ULFactors h = ul_factorize_recursive(p, g.x0, g.m0, n_max);
  for (Eigen::Index n = 0; n <= n_max; ++n) {
    CHECK(rel(h.x[n], f.x[n]) <= tol);
    CHECK(rel(h.y[n], f.y[n]) <= tol);
    CHECK(rel(h.s[n], f.s[n]) <= tol);
    CHECK(rel(h.u[n], f.u[n]) <= tol);
    if (n >= 1) {
      CHECK(rel(h.q[n], f.q[n]) <= tol);
      CHECK(rel(h.r[n], f.r[n]) <= tol);
    }
  }
}

}  // namespace

TEST_CASE("admissible interval endpoints and rejections") {
  CHECK_THROWS_AS(ul_admissibility(make_mm1(1.0, 2.0, 0.0), 0.5, 0.0),
                  ConservativeRecurrentBlocked);

  auto mm1t = make_mm1(2.0, 1.0, 0.0);
  auto rep = ul_admissibility(mm1t, 1.0, 0.0);
  CHECK(rep.admissible);
  CHECK(rel(rep.upper_limit, 1.0) <= 1e-12);
  CHECK(rel(rep.delta, -1.0) <= 1e-12);
  CHECK(rep.a.finite());
  CHECK(rel(rep.a.value, 1.0) <= 1e-12);
  CHECK(!rep.t);

  rep = ul_admissibility(mm1t, 1.0 + 1e-6, 0.0);
  CHECK(!rep.admissible);
  CHECK(rep.reason == "x0 + mu0_tilde exceeds mu_0 + 1/A");

  rep = ul_admissibility(mm1t, 0.4, 0.2);
  CHECK(!rep.admissible);
  CHECK(rep.reason == "mu0_tilde > 0 needs the u-weighted series T to converge");
  REQUIRE(rep.t.has_value());
  CHECK(rep.t->divergent());

  rep = ul_admissibility(mm1t, 0.4, 0.6);
  CHECK(!rep.admissible);
  CHECK(rep.reason == "mu0_tilde T exceeds x0 + mu0_tilde");

  auto mm1k = make_mm1(1.0, 2.0, 1.0);
  rep = ul_admissibility(mm1k, 1.0, 0.0);
  CHECK(rep.admissible);
  CHECK(rep.a.divergent());
  CHECK(rel(rep.upper_limit, 1.0) <= 1e-12);
  rep = ul_admissibility(mm1k, 1.05, 0.0);
  CHECK(!rep.admissible);
  CHECK(rep.reason == "x0 + mu0_tilde exceeds mu_0");
  CHECK(ul_admissibility(mm1k, 0.5, 0.5).admissible);
  rep = ul_admissibility(mm1k, 0.45, 0.55);
  CHECK(!rep.admissible);
  CHECK(rep.reason == "mu0_tilde T exceeds x0 + mu0_tilde");

  auto lin = make_linear(1.0, 1.0, 3.0);
  rep = ul_admissibility(lin, 2.0, 0.0);
  CHECK(rep.admissible);
  CHECK(rel(rep.upper_limit, 2.0) <= 1e-12);
  CHECK(rel(rep.a.value, 0.5) <= 1e-12);
  rep = ul_admissibility(lin, 1.0, 1.0);
  CHECK(rep.admissible);
  REQUIRE(rep.t.has_value());
  CHECK(rel(rep.t->value, 2.0) <= 1e-12);
  rep = ul_admissibility(lin, 0.9, 1.1);
  CHECK(!rep.admissible);
  CHECK(rep.reason == "mu0_tilde T exceeds x0 + mu0_tilde");
  rep = ul_admissibility(lin, 2.1, 0.0);
  CHECK(!rep.admissible);
  CHECK(rep.reason == "x0 + mu0_tilde exceeds mu_0 + 1/A");

  CHECK_THROWS_AS(ul_admissibility(mm1t, 0.0, 0.0), DomainError);
  CHECK_THROWS_AS(ul_admissibility(mm1t, -1.0, 0.0), DomainError);
  CHECK_THROWS_AS(ul_admissibility(mm1t, 0.5, -0.1), DomainError);

  // Quadratic drift: A converges too slowly for the ratio test, and without
  // a closed-form rule the factorization refuses to guess.
  BirthDeathProcess slow([](long n) { return double(n + 1) * double(n + 1); },
                         [](long n) { return double(n) * double(n); }, 0.0,
                         "quadratic-drift");
  CHECK_THROWS_AS(ul_admissibility(slow, 0.5, 0.0), UndeterminedSeries);
}

TEST_CASE("coefficient structure on the admissible grids") {
  auto mm1t = make_mm1(2.0, 1.0, 0.0);
  auto mm1k = make_mm1(1.0, 2.0, 1.0);
  auto lin = make_linear(1.0, 1.0, 3.0);
  for (const auto& g : kGridMm1Transient)
    check_structure(mm1t, ul_factorize(mm1t, g.x0, g.m0, 60));
  for (const auto& g : kGridMm1Killed)
    check_structure(mm1k, ul_factorize(mm1k, g.x0, g.m0, 60));
  for (const auto& g : kGridLinear)
    check_structure(lin, ul_factorize(lin, g.x0, g.m0, 60));
}

TEST_CASE("u ladder matches the escape form away from the boundary") {
  auto mm1t = make_mm1(2.0, 1.0, 0.0);
  auto mm1k = make_mm1(1.0, 2.0, 1.0);
  auto lin = make_linear(1.0, 1.0, 3.0);
  for (const auto* pp : {&mm1t, &mm1k, &lin}) {
    const BirthDeathProcess& p = *pp;
    for (double x0 : {0.2, 0.5}) {
      ULFactors f = ul_factorize(p, x0, 0.0, 40);
      LogWeightLadder l = build_ladder(p, 40);
      Eigen::ArrayXd a = escape_partial_sums(p, l);
      double delta = p.mu0() - x0;
      for (Eigen::Index n = 0; n <= 40; ++n)
        CHECK(rel(f.u[n], 1.0 + delta * a[n]) <= 1e-12);
    }
  }
}

TEST_CASE("closed route agrees with the scalar recursion") {
  auto mm1t = make_mm1(2.0, 1.0, 0.0);
  auto mm1k = make_mm1(1.0, 2.0, 1.0);
  auto lin = make_linear(1.0, 1.0, 3.0);
  for (const auto& g : kGridMm1Transient) check_routes(mm1t, g, 60, 1e-10);
  for (const auto& g : kGridMm1Killed) check_routes(mm1k, g, 60, 1e-10);
  for (const auto& g : kGridLinear) check_routes(lin, g, 60, 1e-10);
}

TEST_CASE("both factor orders reproduce the generator") {
  auto mm1t = make_mm1(2.0, 1.0, 0.0);
  auto mm1k = make_mm1(1.0, 2.0, 1.0);
  auto lin = make_linear(1.0, 1.0, 3.0);
  for (const auto& g : kGridMm1Transient) check_products(mm1t, g, 60);
  for (const auto& g : kGridMm1Killed) check_products(mm1k, g, 60);
  for (const auto& g : kGridLinear) check_products(lin, g, 60);
}

TEST_CASE("boundary tables of the transient random walk") {
  auto p = make_mm1(2.0, 1.0, 0.0);

  // x0 at the upper limit, no extra killing: u_n = 2^{-n}, constant
  // coefficients, and the transform attaches a reflecting boundary.
  ULFactors f = ul_factorize(p, 1.0, 0.0, 80);
  for (Eigen::Index n = 0; n <= 80; ++n) {
    CHECK(rel(f.u[n], std::pow(2.0, -double(n))) <= 1e-12);
    CHECK(rel(f.x[n], 1.0) <= 1e-12);
    CHECK(rel(f.y[n], -1.0) <= 1e-12);
    if (n >= 1) {
      CHECK(rel(f.s[n], 2.0) <= 1e-12);
      CHECK(rel(f.q[n], -0.5) <= 1e-12);
      CHECK(rel(f.r[n], -1.0) <= 1e-12);
    }
  }
  BirthDeathProcess d = ul_darboux(p, 1.0, 0.0, 40);
  CHECK(d.conservative());
  CHECK(rel(d.lambda(0), 1.0) <= 1e-12);
  for (long n = 1; n <= 40; ++n) {
    CHECK(rel(d.lambda(n), 2.0) <= 1e-12);
    CHECK(rel(d.mu(n), 1.0) <= 1e-12);
  }

  // Splitting the same boundary mass between x0 and mu0_tilde scales the
  // remainders by 2^{-n-1} and turns the transform into the killed walk.
  f = ul_factorize(p, 0.5, 0.5, 60);
  for (Eigen::Index n = 0; n <= 60; ++n) {
    double pow2 = std::pow(2.0, -double(n));
    CHECK(rel(f.u[n], pow2) <= 1e-12);
    CHECK(rel(f.x[n], 0.5 * pow2) <= 1e-12);
    CHECK(rel(f.y[n], -pow2) <= 1e-12);
    if (n >= 1) {
      CHECK(rel(f.s[n], 2.0 / pow2) <= 1e-12);
      CHECK(rel(f.q[n], -0.5) <= 1e-12);
      CHECK(rel(f.r[n], -2.0 / (2.0 * pow2)) <= 1e-12);
    }
  }
  d = ul_darboux(p, 0.5, 0.5, 40);
  CHECK(rel(d.mu0(), 0.5) <= 1e-15);
  CHECK(rel(d.lambda(0), 0.5) <= 1e-12);
  for (long n = 1; n <= 40; ++n) {
    CHECK(rel(d.lambda(n), 1.0) <= 1e-12);
    CHECK(rel(d.mu(n), 2.0) <= 1e-12);
  }
}

TEST_CASE("boundary tables of the killed random walk") {
  auto p = make_mm1(1.0, 2.0, 1.0);

  // x0 equal to the killing rate: the dual point, coefficients blow up
  // geometrically but the transformed rates swap birth against death.
  ULFactors f = ul_factorize(p, 1.0, 0.0, 60);
  for (Eigen::Index n = 0; n <= 60; ++n) {
    double pow2 = std::pow(2.0, double(n));
    CHECK(f.u[n] == 1.0);
    CHECK(rel(f.x[n], pow2) <= 1e-12);
    CHECK(rel(f.y[n], -pow2) <= 1e-12);
    if (n >= 1) {
      CHECK(rel(f.s[n], 2.0 / pow2) <= 1e-12);
      CHECK(rel(f.q[n], -1.0) <= 1e-12);
      CHECK(rel(f.r[n], -2.0 / pow2) <= 1e-12);
    }
  }

  // Equal split x0 = mu0_tilde = 1/2: constant columns, the transform keeps
  // the rates of the dual walk but carries killing 1/2.
  f = ul_factorize(p, 0.5, 0.5, 60);
  for (Eigen::Index n = 0; n <= 60; ++n) {
    CHECK(rel(f.x[n], 0.5) <= 1e-12);
    CHECK(rel(f.y[n], -1.0) <= 1e-12);
    if (n >= 1) {
      CHECK(rel(f.s[n], 2.0) <= 1e-12);
      CHECK(rel(f.q[n], -1.0) <= 1e-12);
      CHECK(rel(f.r[n], -2.0) <= 1e-12);
    }
  }
  BirthDeathProcess d = ul_darboux(p, 0.5, 0.5, 40);
  CHECK(rel(d.mu0(), 0.5) <= 1e-15);
  CHECK(rel(d.lambda(0), 0.5) <= 1e-12);
  for (long n = 1; n <= 40; ++n) {
    CHECK(rel(d.lambda(n), 1.0) <= 1e-12);
    CHECK(rel(d.mu(n), 2.0) <= 1e-12);
  }
}

TEST_CASE("boundary tables of the linear family") {
  auto p = make_linear(1.0, 1.0, 3.0);
  LogWeightLadder l = build_ladder(p, 61);

  // At the edge with no killing u_n collapses onto 1/pi_n and the transform
  // shifts the linear parameter down by one.
  ULFactors f = ul_factorize(p, 2.0, 0.0, 60);
  for (Eigen::Index n = 0; n <= 60; ++n) {
    double want_u = 2.0 / (double(n + 1) * double(n + 2));
    CHECK(rel(f.u[n], want_u) <= 1e-11);
    CHECK(rel(f.u[n] * l.pi(n), 1.0) <= 1e-11);
    CHECK(rel(f.x[n], 2.0) <= 1e-11);
    if (n >= 1) CHECK(rel(f.s[n], 0.5 * double(n + 2)) <= 1e-11);
  }
  BirthDeathProcess d = ul_darboux(p, 2.0, 0.0, 40);
  CHECK(d.conservative());
  for (long n = 0; n <= 40; ++n) CHECK(rel(d.lambda(n), double(n + 2)) <= 1e-11);
  for (long n = 1; n <= 40; ++n) CHECK(rel(d.mu(n), double(n)) <= 1e-11);

  // Full boundary budget on the killing side: remainders 2/(n+2), both
  // transformed rate ladders grow linearly with equal coefficients.
  f = ul_factorize(p, 1.0, 1.0, 60);
  for (Eigen::Index n = 0; n <= 60; ++n) {
    CHECK(rel(f.x[n], 2.0 / double(n + 2)) <= 1e-10);
    CHECK(rel(f.y[n], -2.0 / double(n + 1)) <= 1e-10);
  }
  d = ul_darboux(p, 1.0, 1.0, 40);
  CHECK(rel(d.mu0(), 1.0) <= 1e-15);
  for (long n = 0; n <= 40; ++n) CHECK(rel(d.lambda(n), double(n + 1)) <= 1e-10);
  for (long n = 1; n <= 40; ++n) CHECK(rel(d.mu(n), double(n + 1)) <= 1e-10);
}

TEST_CASE("choosing x0 as the killing rate dualizes the process") {
  std::vector<BirthDeathProcess> killed;
  killed.push_back(make_mm1(1.0, 2.0, 1.0));
  killed.push_back(make_mm1(2.0, 1.0, 1.0));
  killed.push_back(make_mm1(1.0, 1.0, 1.0));
  std::vector<double> lam, mu;
  for (long k = 0; k < 160; ++k) {
    lam.push_back(2.0 + 0.3 * std::cos(double(k)));
    mu.push_back(1.0 + 0.25 * std::sin(double(k + 1)));
  }
  killed.push_back(make_table(std::move(lam), std::move(mu), 0.7));

  for (const auto& p : killed) {
    BirthDeathProcess d = ul_darboux(p, p.mu0(), 0.0, 40);
    CHECK(d.conservative());
    CHECK(rel(d.lambda(0), p.mu0()) <= 1e-12);
    for (long n = 1; n <= 40; ++n) CHECK(rel(d.lambda(n), p.mu(n)) <= 1e-12);
    for (long n = 1; n <= 40; ++n) CHECK(rel(d.mu(n), p.lambda(n - 1)) <= 1e-12);
  }
}

TEST_CASE("killing budget at the line endpoint") {
  // Transient walk: along x0 + mu0_tilde = 1 the kernel series is T = 2, so
  // the killing budget tops out at 1/2.
  auto mm1t = make_mm1(2.0, 1.0, 0.0);
  auto rep = ul_admissibility(mm1t, 0.5, 0.5);
  CHECK(rep.admissible);
  REQUIRE(rep.t.has_value());
  CHECK(rel(rep.t->value, 2.0) <= 1e-12);

  auto clone = table_clone(mm1t, 300, 0.0);
  SeriesVerdict tv = ul_series_T(clone, 1.0);
  CHECK(tv.finite());
  CHECK(tv.evidence == "ratio test, geometric tail bound under tolerance");
  CHECK(rel(tv.value, 2.0) <= 1e-10);
  CHECK(std::abs(1.0 / tv.value - 0.5) <= 1e-10);
  CHECK(ul_admissibility(clone, 0.5, 0.5).admissible);
  rep = ul_admissibility(clone, 0.4998, 0.5002);
  CHECK(!rep.admissible);
  CHECK(rep.reason == "mu0_tilde T exceeds x0 + mu0_tilde");

  // Killed walk: same budget 1/2 on its line, from the dual closed form.
  auto mm1k = make_mm1(1.0, 2.0, 1.0);
  CHECK(ul_admissibility(mm1k, 0.5, 0.5).admissible);
  auto clone_k = table_clone(mm1k, 300, 1.0);
  tv = ul_series_T(clone_k, 1.0);
  CHECK(tv.finite());
  CHECK(rel(tv.value, 2.0) <= 1e-10);

  // Linear family: budget lambda (beta - 2) = 1 at the edge.  The series
  // converges only quadratically there, so the numeric engine refuses a
  // verdict and the closed-form rule is what settles the endpoint.
  auto lin = make_linear(1.0, 1.0, 3.0);
  rep = ul_admissibility(lin, 1.0, 1.0);
  CHECK(rep.admissible);
  CHECK(rel(rep.t->value, 2.0) <= 1e-12);
  CHECK(std::abs(2.0 / rep.t->value - 1.0) <= 1e-12);
  CHECK(!ul_admissibility(lin, 0.95, 1.05).admissible);
  CHECK(ul_admissibility(lin, 1.05, 0.95).admissible);

  BirthDeathProcess lin_bare([](long n) { return double(n) + 3.0; },
                             [](long n) { return double(n); }, 0.0, "linear-bare");
  SeriesHints h;
  h.a = []() -> std::optional<ClosedFormSeries> { return ClosedFormSeries::Finite(0.5); };
  lin_bare.set_hints(std::move(h));
  CHECK_THROWS_AS(ul_admissibility(lin_bare, 1.0, 1.0), UndeterminedSeries);
}

TEST_CASE("bookkeeping of the transformed table") {
  auto p = make_mm1(2.0, 1.0, 0.0);
  ULFactors f = ul_factorize(p, 0.75, 0.25, 30);
  CHECK(f.level() == 30);
  CHECK(f.x0 == 0.75);
  CHECK(f.mu0_tilde == 0.25);

  BirthDeathProcess d = ul_darboux(p, 0.75, 0.25, 30);
  CHECK(d.mu0() == 0.25);
  CHECK(!d.conservative());
  CHECK(d.label().find("/darboux-ul") != std::string::npos);
  for (long n = 0; n <= 30; ++n) {
    CHECK(rel(d.lambda(n), f.s[n] * f.x[n]) <= 1e-13);
    CHECK(d.lambda(n) > 0.0);
  }
  for (long n = 1; n <= 30; ++n) {
    CHECK(rel(d.mu(n), f.r[n] * f.y[n - 1]) <= 1e-13);
    CHECK(d.mu(n) > 0.0);
  }
  CHECK_THROWS_AS(d.lambda(31), InvalidRates);
  CHECK_THROWS_AS(d.mu(31), InvalidRates);

  CHECK_THROWS_AS(ul_factorize(p, 0.5, 0.0, 0), DomainError);
  CHECK_THROWS_AS(ul_factorize_recursive(p, 0.5, 0.0, 0), DomainError);
  try {
    ul_factorize(p, 0.4, 0.2, 20);
    CHECK(false);
  } catch (const InadmissibleUL& e) {
    CHECK(e.which() == "interval");
    CHECK(e.index() == -1);
  }
}
