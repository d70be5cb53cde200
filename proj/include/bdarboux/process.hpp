#pragma once

// Birth-death process description: birth rates lambda_n (n >= 0), death rates
// mu_n (n >= 1) and a killing rate mu0 >= 0 out of state 0 into an absorbing
// cemetery state.  The process is the value type every other module consumes;
// rate callables must be pure so that evaluation is deterministic.

#include <Eigen/Core>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bdarboux/errors.hpp"
#include "bdarboux/special_functions.hpp"

namespace bdarboux {

// Closed-form knowledge about one of the convergence-defining series of a
// process.  Presets install these; the series engine consults them before
// falling back to the numeric ratio test.
struct ClosedFormSeries {
  bool finite = false;
  double value = std::numeric_limits<double>::infinity();

  static ClosedFormSeries Finite(double v) { return {true, v}; }
  static ClosedFormSeries Divergent() { return {false, std::numeric_limits<double>::infinity()}; }
};

struct SeriesHints {
  std::function<std::optional<ClosedFormSeries>()> a;
  std::function<std::optional<ClosedFormSeries>()> b;
  std::function<std::optional<ClosedFormSeries>()> s;
  // The last series depends on the offset x0 + mu0_tilde of the upper/lower
  // factorization; the hint receives that offset.
  std::function<std::optional<ClosedFormSeries>(double)> t;
};

class BirthDeathProcess {
 public:
  using RateFn = std::function<double(long)>;

  BirthDeathProcess(RateFn lambda, RateFn mu, double mu0, std::string label)
      : lambda_(std::move(lambda)), mu_(std::move(mu)), mu0_(mu0), label_(std::move(label)) {
    if (!(mu0_ >= 0.0) || !std::isfinite(mu0_))
      throw InvalidRates("killing rate mu0 must be finite and >= 0", -1);
  }

  double lambda(long n) const {
    if (n < 0) throw InvalidRates("lambda queried at negative index", n);
    double v = lambda_(n);
    if (!(v > 0.0) || !std::isfinite(v))
      throw InvalidRates("birth rate must be finite and positive", n);
    return v;
  }

  double mu(long n) const {
    if (n < 1) throw InvalidRates("mu queried below index 1", n);
    double v = mu_(n);
    if (!(v > 0.0) || !std::isfinite(v))
      throw InvalidRates("death rate must be finite and positive", n);
    return v;
  }

  double mu0() const { return mu0_; }
  bool conservative() const { return mu0_ == 0.0; }
  const std::string& label() const { return label_; }

  const SeriesHints& hints() const { return hints_; }
  void set_hints(SeriesHints h) { hints_ = std::move(h); }

 private:
  RateFn lambda_;
  RateFn mu_;
  double mu0_;
  std::string label_;
  SeriesHints hints_;
};

// Constant-rate process: lambda_n = lambda, mu_n = mu.
inline BirthDeathProcess make_mm1(double lam, double mu, double mu0) {
  if (!(lam > 0.0) || !(mu > 0.0)) throw InvalidRates("mm1 needs lambda, mu > 0", 0);
  BirthDeathProcess p([lam](long) { return lam; }, [mu](long) { return mu; }, mu0,
                      "mm1(lambda=" + std::to_string(lam) + ",mu=" + std::to_string(mu) +
                          ",mu0=" + std::to_string(mu0) + ")");
  SeriesHints h;
  h.a = [lam, mu]() -> std::optional<ClosedFormSeries> {
    if (mu < lam) return ClosedFormSeries::Finite(1.0 / (lam - mu));
    return ClosedFormSeries::Divergent();
  };
  h.b = [lam, mu]() -> std::optional<ClosedFormSeries> {
    if (mu > lam) return ClosedFormSeries::Finite(mu / (mu - lam));
    return ClosedFormSeries::Divergent();
  };
  h.s = [lam, mu, mu0]() -> std::optional<ClosedFormSeries> {
    if (mu0 > 0.0) return ClosedFormSeries::Divergent();
    if (mu > lam) return ClosedFormSeries::Finite(mu / (mu - lam));
    return ClosedFormSeries::Divergent();
  };
  h.t = [lam, mu, mu0](double x0p) -> std::optional<ClosedFormSeries> {
    double special = mu0 + (lam > mu ? lam - mu : 0.0);
    if (std::abs(x0p - special) <= 1e-12 * std::max(1.0, std::abs(special))) {
      if (lam > mu) return ClosedFormSeries::Finite(lam / (lam - mu));
      if (lam < mu) return ClosedFormSeries::Finite(mu / (mu - lam));
      return ClosedFormSeries::Divergent();
    }
    return ClosedFormSeries::Divergent();
  };
  p.set_hints(std::move(h));
  return p;
}

// Infinite-server process: lambda_n = lambda, mu_n = n mu, conservative.
inline BirthDeathProcess make_mm_inf(double lam, double mu) {
  if (!(lam > 0.0) || !(mu > 0.0)) throw InvalidRates("mm_inf needs lambda, mu > 0", 0);
  BirthDeathProcess p([lam](long) { return lam; },
                      [mu](long n) { return static_cast<double>(n) * mu; }, 0.0,
                      "mm_inf(lambda=" + std::to_string(lam) + ",mu=" + std::to_string(mu) + ")");
  SeriesHints h;
  h.a = []() -> std::optional<ClosedFormSeries> { return ClosedFormSeries::Divergent(); };
  h.b = [lam, mu]() -> std::optional<ClosedFormSeries> {
    return ClosedFormSeries::Finite(std::exp(lam / mu));
  };
  h.s = h.b;  // conservative, so the killed series coincides with B
  p.set_hints(std::move(h));
  return p;
}

// Linear-rate process: lambda_n = (n + beta) lambda, mu_n = n mu, conservative.
inline BirthDeathProcess make_linear(double lam, double mu, double beta) {
  if (!(lam > 0.0) || !(mu > 0.0) || !(beta > 0.0))
    throw InvalidRates("linear preset needs lambda, mu, beta > 0", 0);
  BirthDeathProcess p([lam, beta](long n) { return (static_cast<double>(n) + beta) * lam; },
                      [mu](long n) { return static_cast<double>(n) * mu; }, 0.0,
                      "linear(lambda=" + std::to_string(lam) + ",mu=" + std::to_string(mu) +
                          ",beta=" + std::to_string(beta) + ")");
  SeriesHints h;
  h.a = [lam, mu, beta]() -> std::optional<ClosedFormSeries> {
    if (lam > mu)
      return ClosedFormSeries::Finite(gauss_2f1(1.0, 1.0, beta + 1.0, mu / lam) / (lam * beta));
    if (lam == mu && beta > 1.0) return ClosedFormSeries::Finite(1.0 / (lam * (beta - 1.0)));
    return ClosedFormSeries::Divergent();
  };
  h.b = [lam, mu, beta]() -> std::optional<ClosedFormSeries> {
    if (lam < mu) return ClosedFormSeries::Finite(std::pow(1.0 - lam / mu, -beta));
    return ClosedFormSeries::Divergent();
  };
  h.s = h.b;
  h.t = [lam, mu, beta](double x0p) -> std::optional<ClosedFormSeries> {
    if (lam != mu) return std::nullopt;  // geometric tails, the engine decides
    double edge = lam * (beta - 1.0);
    if (beta > 1.0 && std::abs(x0p - edge) <= 1e-12 * std::max(1.0, edge)) {
      if (beta > 2.0) return ClosedFormSeries::Finite((beta - 1.0) / (beta - 2.0));
      return ClosedFormSeries::Divergent();
    }
    return ClosedFormSeries::Divergent();
  };
  p.set_hints(std::move(h));
  return p;
}

// Process backed by explicit rate tables.  Valid for n < lambda.size() on the
// birth side and n <= mu.size() on the death side; queries beyond throw.
inline BirthDeathProcess make_table(std::vector<double> lambda, std::vector<double> mu,
                                    double mu0) {
  auto lam_fn = [tab = std::move(lambda)](long n) -> double {
    if (n >= static_cast<long>(tab.size()))
      throw InvalidRates("birth rate table exhausted", n);
    return tab[static_cast<size_t>(n)];
  };
  auto mu_fn = [tab = std::move(mu)](long n) -> double {
    if (n - 1 >= static_cast<long>(tab.size()))
      throw InvalidRates("death rate table exhausted", n);
    return tab[static_cast<size_t>(n - 1)];
  };
  return BirthDeathProcess(std::move(lam_fn), std::move(mu_fn), mu0, "table");
}

// Dense N x N truncation of the generator.  Row 0 carries the killing rate on
// the diagonal; the last row simply drops the outgoing birth entry.
inline Eigen::MatrixXd truncated_generator(const BirthDeathProcess& p, Eigen::Index n) {
  if (n < 1) throw DomainError("truncated_generator needs N >= 1");
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  a(0, 0) = -(p.lambda(0) + p.mu0());
  if (n > 1) a(0, 1) = p.lambda(0);
  for (Eigen::Index i = 1; i < n; ++i) {
    a(i, i - 1) = p.mu(i);
    a(i, i) = -(p.lambda(i) + p.mu(i));
    if (i + 1 < n) a(i, i + 1) = p.lambda(i);
  }
  return a;
}

// Doob h-transform by a positive harmonic function h: the new process has
// rates lambda_n h(n+1)/h(n) and mu_n h(n-1)/h(n) and no killing.
// Harmonicity is checked numerically on the first `check_states` states:
// |(A h)(i)| <= tol * (lambda_i + mu_i) * h(i).
inline BirthDeathProcess doob_transform(const BirthDeathProcess& p,
                                        std::function<double(long)> h,
                                        long check_states = 50, double tol = 1e-10) {
  for (long i = 0; i <= check_states; ++i) {
    double hi = h(i);
    if (!(hi > 0.0)) throw NonHarmonic(i, std::numeric_limits<double>::infinity());
    double li = p.lambda(i);
    double mi = (i == 0) ? p.mu0() : p.mu(i);
    double flow = li * h(i + 1) - (li + mi) * hi + (i == 0 ? 0.0 : mi * h(i - 1));
    double scale = (li + mi) * hi;
    if (std::abs(flow) > tol * scale) throw NonHarmonic(i, std::abs(flow) / scale);
  }
  // Capture the source process by value so the result owns its rates.
  BirthDeathProcess base = p;
  return BirthDeathProcess(
      [base, h](long n) { return base.lambda(n) * h(n + 1) / h(n); },
      [base, h](long n) { return base.mu(n) * h(n - 1) / h(n); }, 0.0,
      p.label() + "/doob");
}

}  // namespace bdarboux
