#pragma once

// JSON process descriptions and the canonical serializations the command
// line tool emits.  Output formatting lives here so tests can reproduce it
// byte for byte.

#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "bdarboux/errors.hpp"
#include "bdarboux/factor_lu.hpp"
#include "bdarboux/factor_ul.hpp"
#include "bdarboux/presets.hpp"
#include "bdarboux/process.hpp"
#include "bdarboux/series.hpp"

namespace bdarboux {

struct ParsedProcess {
  BirthDeathProcess process;
  nlohmann::ordered_json echo;  // canonical form of the accepted description
};

namespace detail {

inline double require_number(const nlohmann::json& j, const char* key,
                             bool positive, bool allow_zero) {
  if (!j.contains(key) || !j[key].is_number())
    throw DomainError(std::string("process description needs a numeric '") + key + "'");
  double v = j[key].get<double>();
  if (positive && !(allow_zero ? v >= 0.0 : v > 0.0))
    throw DomainError(std::string("'") + key + "' is out of range");
  return v;
}

}  // namespace detail

// Accepts {"preset": "mm1"|"mm_inf"|"linear", "params": {...}} or
// {"table": {"lambda": [...], "mu": [...], "mu0": x}}.
inline ParsedProcess parse_process_spec(const nlohmann::json& j) {
  if (!j.is_object())
    throw DomainError("process description must be a JSON object");
  if (j.contains("table")) {
    const nlohmann::json& t = j["table"];
    if (!t.is_object() || !t.contains("lambda") || !t["lambda"].is_array() ||
        !t.contains("mu") || !t["mu"].is_array())
      throw DomainError("table description needs 'lambda' and 'mu' arrays");
    std::vector<double> lam = t["lambda"].get<std::vector<double>>();
    std::vector<double> mu = t["mu"].get<std::vector<double>>();
    double mu0 = t.contains("mu0") ? detail::require_number(t, "mu0", true, true) : 0.0;
    if (lam.empty()) throw DomainError("table description needs at least one birth rate");
    for (size_t k = 0; k < lam.size(); ++k)
      if (!(lam[k] > 0.0)) throw InvalidRates("non-positive birth rate in table", (long)k);
    for (size_t k = 0; k < mu.size(); ++k)
      if (!(mu[k] > 0.0)) throw InvalidRates("non-positive death rate in table", (long)(k + 1));
    nlohmann::ordered_json echo;
    echo["table"]["lambda"] = lam;
    echo["table"]["mu"] = mu;
    echo["table"]["mu0"] = mu0;
    return {make_table(std::move(lam), std::move(mu), mu0), echo};
  }
  if (!j.contains("preset") || !j["preset"].is_string())
    throw DomainError("process description needs a 'preset' string or a 'table' object");
  std::string preset = j["preset"].get<std::string>();
  nlohmann::json params = j.contains("params") ? j["params"] : nlohmann::json::object();
  if (!params.is_object()) throw DomainError("'params' must be an object");
  nlohmann::ordered_json echo;
  echo["preset"] = preset;
  if (preset == "mm1") {
    double lam = detail::require_number(params, "lambda", true, false);
    double mu = detail::require_number(params, "mu", true, false);
    double mu0 =
        params.contains("mu0") ? detail::require_number(params, "mu0", true, true) : 0.0;
    echo["params"]["lambda"] = lam;
    echo["params"]["mu"] = mu;
    echo["params"]["mu0"] = mu0;
    return {make_mm1(lam, mu, mu0), echo};
  }
  if (preset == "mm_inf") {
    double lam = detail::require_number(params, "lambda", true, false);
    double mu = detail::require_number(params, "mu", true, false);
    echo["params"]["lambda"] = lam;
    echo["params"]["mu"] = mu;
    return {make_mm_inf(lam, mu), echo};
  }
  if (preset == "linear") {
    double lam = detail::require_number(params, "lambda", true, false);
    double mu = detail::require_number(params, "mu", true, false);
    double beta = detail::require_number(params, "beta", true, false);
    echo["params"]["lambda"] = lam;
    echo["params"]["mu"] = mu;
    echo["params"]["beta"] = beta;
    return {make_linear(lam, mu, beta), echo};
  }
  throw DomainError("unknown preset '" + preset + "'");
}

// Closed-form spectral measure for the preset families that have one.
inline std::optional<SpectralMeasure> preset_measure_from_spec(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("preset")) return std::nullopt;
  std::string preset = j["preset"].get<std::string>();
  nlohmann::json params = j.contains("params") ? j["params"] : nlohmann::json::object();
  if (preset == "mm1") {
    double mu0 = params.contains("mu0") ? params["mu0"].get<double>() : 0.0;
    return mm1_measure(params["lambda"].get<double>(), params["mu"].get<double>(), mu0);
  }
  if (preset == "mm_inf")
    return mminf_measure(params["lambda"].get<double>(), params["mu"].get<double>());
  if (preset == "linear")
    return linear_measure(params["lambda"].get<double>(), params["mu"].get<double>(),
                          params["beta"].get<double>());
  return std::nullopt;
}

inline nlohmann::ordered_json json_of(const SeriesVerdict& v) {
  nlohmann::ordered_json j;
  switch (v.kind) {
    case SeriesKind::Finite: j["kind"] = "finite"; break;
    case SeriesKind::Divergent: j["kind"] = "divergent"; break;
    case SeriesKind::Undetermined: j["kind"] = "undetermined"; break;
  }
  if (v.finite()) {
    j["value"] = v.value;
    j["tail_bound"] = v.tail_bound;
  }
  j["terms_used"] = v.terms_used;
  j["evidence"] = v.evidence;
  return j;
}

inline nlohmann::ordered_json json_of(const Classification& c) {
  nlohmann::ordered_json j;
  j["conservative"] = c.conservative;
  j["regime"] = to_string(c.regime);
  j["A"] = json_of(c.a);
  j["B"] = json_of(c.b);
  return j;
}

namespace detail {

inline std::string num17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

// Factor tables as CSV.  Cells whose index lies outside a column's range
// stay empty.
inline void write_lu_csv(std::ostream& os, const LUFactors& f) {
  os << "n,s_tilde,r_tilde,x_tilde,y_tilde,lambda_hat,mu_hat\n";
  Eigen::Index n_max = f.s_tilde.size() - 1;
  for (Eigen::Index n = 0; n <= n_max; ++n) {
    os << n << ',' << detail::num17(f.s_tilde[n]) << ',';
    if (n >= 1) os << detail::num17(f.r_tilde[n]);
    os << ',' << detail::num17(f.x_tilde[n]) << ',' << detail::num17(f.y_tilde[n]) << ',';
    if (n < n_max) os << detail::num17(f.x_tilde[n] * f.s_tilde[n + 1]);
    os << ',';
    if (n >= 1) os << detail::num17(f.y_tilde[n] * f.r_tilde[n]);
    os << '\n';
  }
}

inline void write_ul_csv(std::ostream& os, const ULFactors& f) {
  os << "n,x,y,s,r,u,lambda_tilde,mu_tilde\n";
  Eigen::Index n_max = f.x.size() - 1;
  for (Eigen::Index n = 0; n <= n_max; ++n) {
    os << n << ',' << detail::num17(f.x[n]) << ',' << detail::num17(f.y[n]) << ','
       << detail::num17(f.s[n]) << ',';
    if (n >= 1) os << detail::num17(f.r[n]);
    os << ',' << detail::num17(f.u[n]) << ',' << detail::num17(f.s[n] * f.x[n]) << ',';
    if (n >= 1) os << detail::num17(f.r[n] * f.y[n - 1]);
    os << '\n';
  }
}

}  // namespace bdarboux
