// Command line frontend.  Every subcommand echoes its resolved configuration
// (canonical JSON) into the output header so runs are self-describing, and
// exits 0 only when the computation succeeded and every requested check
// passed.  Usage problems exit 2, inadmissible factorization parameters exit
// 3, undecidable numerics exit 4.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "bdarboux/errors.hpp"
#include "bdarboux/factor_lu.hpp"
#include "bdarboux/factor_ul.hpp"
#include "bdarboux/io.hpp"
#include "bdarboux/ladder.hpp"
#include "bdarboux/montecarlo.hpp"
#include "bdarboux/polynomials.hpp"
#include "bdarboux/presets.hpp"
#include "bdarboux/process.hpp"
#include "bdarboux/series.hpp"
#include "bdarboux/spectral.hpp"

namespace {

using nlohmann::ordered_json;
using namespace bdarboux;

std::string g10(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

struct ErrorReport {
  int code;
  std::string kind;
  std::string message;
  ordered_json details;
};

int emit_error(bool as_json, const ErrorReport& e) {
  if (as_json) {
    ordered_json j;
    j["error"]["kind"] = e.kind;
    j["error"]["message"] = e.message;
    if (!e.details.empty()) j["error"]["details"] = e.details;
    j["error"]["exit"] = e.code;
    std::cerr << j.dump(2) << "\n";
  } else {
    std::cerr << "error: " << e.message << "\n";
  }
  return e.code;
}

int guarded(bool as_json, const std::function<int()>& body) {
  try {
    return body();
  } catch (const InadmissibleMu0Hat& e) {
    ordered_json d;
    d["index"] = e.index();
    d["value"] = e.value();
    return emit_error(as_json, {3, "InadmissibleMu0Hat", e.what(), d});
  } catch (const InadmissibleUL& e) {
    ordered_json d;
    d["condition"] = e.which();
    d["index"] = e.index();
    return emit_error(as_json, {3, "InadmissibleUL", e.what(), d});
  } catch (const ConservativeRecurrentBlocked& e) {
    return emit_error(as_json, {3, "ConservativeRecurrentBlocked", e.what(), {}});
  } catch (const UndeterminedSeries& e) {
    return emit_error(as_json, {4, "UndeterminedSeries", e.what(), {}});
  } catch (const RuntimeCap& e) {
    return emit_error(as_json, {4, "RuntimeCap", e.what(), {}});
  } catch (const TooFewAccepted& e) {
    return emit_error(as_json, {4, "TooFewAccepted", e.what(), {}});
  } catch (const DivergentMoment& e) {
    return emit_error(as_json, {4, "DivergentMoment", e.what(), {}});
  } catch (const NonHarmonic& e) {
    return emit_error(as_json, {2, "NonHarmonic", e.what(), {}});
  } catch (const InvalidRates& e) {
    return emit_error(as_json, {2, "InvalidRates", e.what(), {}});
  } catch (const DomainError& e) {
    return emit_error(as_json, {2, "DomainError", e.what(), {}});
  } catch (const nlohmann::json::exception& e) {
    return emit_error(as_json, {2, "InvalidJson", e.what(), {}});
  } catch (const std::exception& e) {
    return emit_error(as_json, {2, "Error", e.what(), {}});
  }
}

// Options shared by the process-consuming subcommands.  The process comes
// either from a JSON description file or from --preset plus parameter flags;
// either way the canonical echo produced by the parser goes into the header.
struct Common {
  std::string spec_path;
  std::string preset;
  double lambda = 0.0, mu = 0.0, mu0 = 0.0, beta = 0.0;
  long levels = 50;
  double tol = 1e-12;
  std::string format = "table";
  bool json_flag = false;

  CLI::Option* o_lambda = nullptr;
  CLI::Option* o_mu = nullptr;
  CLI::Option* o_mu0 = nullptr;
  CLI::Option* o_beta = nullptr;

  void attach(CLI::App* cmd, bool with_levels) {
    cmd->add_option("--spec", spec_path, "path to a JSON process description");
    cmd->add_option("--preset", preset, "preset family: mm1, mm_inf, linear")
        ->check(CLI::IsMember({"mm1", "mm_inf", "linear"}));
    o_lambda = cmd->add_option("--lambda", lambda, "preset birth rate parameter");
    o_mu = cmd->add_option("--mu", mu, "preset death rate parameter");
    o_mu0 = cmd->add_option("--mu0", mu0, "killing rate at state 0 (mm1 only)");
    o_beta = cmd->add_option("--beta", beta, "offset parameter (linear only)");
    if (with_levels)
      cmd->add_option("--N", levels, "number of levels to compute")
          ->check(CLI::Range(1l, 100000l))
          ->capture_default_str();
    cmd->add_option("--tol", tol, "series convergence tolerance")->capture_default_str();
    cmd->add_option("--format", format, "output format")
        ->check(CLI::IsMember({"table", "json", "csv"}))
        ->capture_default_str();
    cmd->add_flag("--json", json_flag, "shorthand for --format json");
  }

  bool json() const { return json_flag || format == "json"; }
  bool csv() const { return !json() && format == "csv"; }

  SeriesOptions series_options() const {
    SeriesOptions o;
    o.tol = tol;
    return o;
  }

  ParsedProcess resolve() const {
    if (!spec_path.empty()) {
      std::ifstream in(spec_path);
      if (!in) throw DomainError("cannot open process description '" + spec_path + "'");
      nlohmann::json j = nlohmann::json::parse(in);
      return parse_process_spec(j);
    }
    if (preset.empty())
      throw DomainError("no process given: use --preset or --spec");
    nlohmann::json j;
    j["preset"] = preset;
    j["params"] = nlohmann::json::object();
    if (o_lambda->count()) j["params"]["lambda"] = lambda;
    if (o_mu->count()) j["params"]["mu"] = mu;
    if (o_mu0->count()) j["params"]["mu0"] = mu0;
    if (o_beta->count()) j["params"]["beta"] = beta;
    return parse_process_spec(j);
  }

  ordered_json config(const char* command, const ParsedProcess& pp) const {
    ordered_json c;
    c["command"] = command;
    c["process"] = pp.echo;
    return c;
  }

  void finish_config(ordered_json& c) const {
    c["tol"] = tol;
    c["format"] = json() ? "json" : format;
  }
};

// One writer per format; the JSON payload is merged under a config header so
// identical invocations serialize byte for byte.
void emit(const Common& c, const ordered_json& config, const ordered_json& payload,
          const std::function<void(std::ostream&)>& table,
          const std::function<void(std::ostream&)>& csv) {
  if (c.json()) {
    ordered_json root;
    root["config"] = config;
    for (const auto& item : payload.items()) root[item.key()] = item.value();
    std::cout << root.dump(2) << "\n";
  } else if (c.csv()) {
    std::cout << "# " << config.dump() << "\n";
    csv(std::cout);
  } else {
    std::cout << "# config " << config.dump() << "\n";
    table(std::cout);
  }
}

ordered_json lu_rows_json(const LUFactors& f) {
  ordered_json rows = ordered_json::array();
  Eigen::Index n_max = f.s_tilde.size() - 1;
  for (Eigen::Index n = 0; n <= n_max; ++n) {
    ordered_json row;
    row["n"] = n;
    row["s_tilde"] = f.s_tilde[n];
    if (n >= 1)
      row["r_tilde"] = f.r_tilde[n];
    else
      row["r_tilde"] = nullptr;
    row["x_tilde"] = f.x_tilde[n];
    row["y_tilde"] = f.y_tilde[n];
    if (n < n_max)
      row["lambda_hat"] = f.x_tilde[n] * f.s_tilde[n + 1];
    else
      row["lambda_hat"] = nullptr;
    if (n >= 1)
      row["mu_hat"] = f.y_tilde[n] * f.r_tilde[n];
    else
      row["mu_hat"] = nullptr;
    rows.push_back(row);
  }
  return rows;
}

ordered_json ul_rows_json(const ULFactors& f) {
  ordered_json rows = ordered_json::array();
  Eigen::Index n_max = f.x.size() - 1;
  for (Eigen::Index n = 0; n <= n_max; ++n) {
    ordered_json row;
    row["n"] = n;
    row["x"] = f.x[n];
    row["y"] = f.y[n];
    row["s"] = f.s[n];
    if (n >= 1)
      row["r"] = f.r[n];
    else
      row["r"] = nullptr;
    row["u"] = f.u[n];
    row["lambda_tilde"] = f.s[n] * f.x[n];
    if (n >= 1)
      row["mu_tilde"] = f.r[n] * f.y[n - 1];
    else
      row["mu_tilde"] = nullptr;
    rows.push_back(row);
  }
  return rows;
}

void print_lu_table(std::ostream& os, const LUFactors& f) {
  os << std::setw(5) << "n" << std::setw(16) << "s_tilde" << std::setw(16) << "r_tilde"
     << std::setw(16) << "x_tilde" << std::setw(16) << "y_tilde" << std::setw(16)
     << "lambda_hat" << std::setw(16) << "mu_hat" << "\n";
  Eigen::Index n_max = f.s_tilde.size() - 1;
  for (Eigen::Index n = 0; n <= n_max; ++n) {
    os << std::setw(5) << n << std::setw(16) << g10(f.s_tilde[n]) << std::setw(16)
       << (n >= 1 ? g10(f.r_tilde[n]) : std::string("-")) << std::setw(16)
       << g10(f.x_tilde[n]) << std::setw(16) << g10(f.y_tilde[n]) << std::setw(16)
       << (n < n_max ? g10(f.x_tilde[n] * f.s_tilde[n + 1]) : std::string("-"))
       << std::setw(16) << (n >= 1 ? g10(f.y_tilde[n] * f.r_tilde[n]) : std::string("-"))
       << "\n";
  }
}

void print_ul_table(std::ostream& os, const ULFactors& f) {
  os << std::setw(5) << "n" << std::setw(16) << "x" << std::setw(16) << "y"
     << std::setw(16) << "s" << std::setw(16) << "r" << std::setw(16) << "u"
     << std::setw(16) << "lambda_tilde" << std::setw(16) << "mu_tilde" << "\n";
  Eigen::Index n_max = f.x.size() - 1;
  for (Eigen::Index n = 0; n <= n_max; ++n) {
    os << std::setw(5) << n << std::setw(16) << g10(f.x[n]) << std::setw(16)
       << g10(f.y[n]) << std::setw(16) << g10(f.s[n]) << std::setw(16)
       << (n >= 1 ? g10(f.r[n]) : std::string("-")) << std::setw(16) << g10(f.u[n])
       << std::setw(16) << g10(f.s[n] * f.x[n]) << std::setw(16)
       << (n >= 1 ? g10(f.r[n] * f.y[n - 1]) : std::string("-")) << "\n";
  }
}

ordered_json admissibility_json(const ULAdmissibility& rep) {
  ordered_json j;
  j["admissible"] = rep.admissible;
  if (!rep.reason.empty()) j["reason"] = rep.reason;
  j["x0"] = rep.x0;
  j["mu0_tilde"] = rep.mu0_tilde;
  j["delta"] = rep.delta;
  j["upper_limit"] = rep.upper_limit;
  j["A"] = json_of(rep.a);
  if (rep.t)
    j["T"] = json_of(*rep.t);
  else
    j["T"] = nullptr;
  return j;
}

// Materialize the atoms of a measure for serialization: explicit atoms plus
// the head of any atom sequence, cut off once masses drop below 1e-15.
ordered_json atoms_json(const SpectralMeasure& m) {
  ordered_json a = ordered_json::array();
  for (const SpectralAtom& atom : m.atoms) {
    ordered_json one;
    one["location"] = atom.location;
    one["mass"] = atom.mass;
    a.push_back(one);
  }
  if (m.atom_seq) {
    for (long k = 0; k < 200; ++k) {
      SpectralAtom atom = m.atom_seq(k);
      if (k > 10 && std::abs(atom.mass) < 1e-15) break;
      ordered_json one;
      one["location"] = atom.location;
      one["mass"] = atom.mass;
      a.push_back(one);
    }
  }
  return a;
}

ordered_json measure_json(const SpectralMeasure& m, const ordered_json& density_ref) {
  ordered_json j;
  if (m.density) {
    j["density"] = density_ref;
    j["support"] = {m.lo, m.hi};
  } else {
    j["density"] = nullptr;
  }
  j["atoms"] = atoms_json(m);
  return j;
}

int run_classify(const Common& c) {
  ParsedProcess pp = c.resolve();
  Classification cls = classify(pp.process, c.series_options());
  ordered_json config = c.config("classify", pp);
  c.finish_config(config);
  ordered_json payload;
  payload["classification"] = json_of(cls);
  emit(
      c, config, payload,
      [&](std::ostream& os) {
        os << "conservative: " << (cls.conservative ? "yes" : "no") << "\n";
        os << "regime: " << to_string(cls.regime) << "\n";
        auto line = [&](const char* name, const SeriesVerdict& v) {
          os << name << ": ";
          if (v.finite())
            os << "finite, value " << g10(v.value) << " (tail bound " << g10(v.tail_bound)
               << ")";
          else if (v.divergent())
            os << "divergent";
          else
            os << "undetermined";
          os << ", " << v.terms_used << " terms, " << v.evidence << "\n";
        };
        line("A", cls.a);
        line("B", cls.b);
      },
      [&](std::ostream& os) {
        os << "conservative,regime,A_kind,A_value,B_kind,B_value\n";
        auto kind = [](const SeriesVerdict& v) {
          return v.finite() ? "finite" : v.divergent() ? "divergent" : "undetermined";
        };
        os << (cls.conservative ? "true" : "false") << ',' << to_string(cls.regime) << ','
           << kind(cls.a) << ',' << (cls.a.finite() ? detail::num17(cls.a.value) : "")
           << ',' << kind(cls.b) << ','
           << (cls.b.finite() ? detail::num17(cls.b.value) : "") << "\n";
      });
  return cls.regime == Regime::Undetermined ? 4 : 0;
}

int run_factorize_lu(const Common& c, double mu0_hat, bool recursive) {
  ParsedProcess pp = c.resolve();
  SeriesOptions so = c.series_options();
  LUFactors f = recursive ? lu_factorize_recursive(pp.process, mu0_hat, c.levels, so)
                          : lu_factorize(pp.process, mu0_hat, c.levels, so);
  double bound = lu_admissible_upper_bound(pp.process, so);
  ordered_json config = c.config("factorize-lu", pp);
  config["mu0_hat"] = mu0_hat;
  config["route"] = recursive ? "recursive" : "closed";
  config["N"] = c.levels;
  c.finish_config(config);
  ordered_json payload;
  payload["mu0_hat_upper_bound"] = bound;
  payload["factors"] = lu_rows_json(f);
  emit(
      c, config, payload,
      [&](std::ostream& os) {
        os << "admissible mu0_hat range: [0, " << g10(bound) << "]\n";
        print_lu_table(os, f);
      },
      [&](std::ostream& os) { write_lu_csv(os, f); });
  return 0;
}

int run_factorize_ul(const Common& c, double x0, double mu0_tilde, bool recursive) {
  ParsedProcess pp = c.resolve();
  SeriesOptions so = c.series_options();
  ULAdmissibility rep = ul_admissibility(pp.process, x0, mu0_tilde, so);
  if (!rep.admissible)
    throw InadmissibleUL(rep.reason, -1, "x0 + mu0_tilde");
  ULFactors f = recursive ? ul_factorize_recursive(pp.process, x0, mu0_tilde, c.levels, so)
                          : ul_factorize(pp.process, x0, mu0_tilde, c.levels, so);
  ordered_json config = c.config("factorize-ul", pp);
  config["x0"] = x0;
  config["mu0_tilde"] = mu0_tilde;
  config["route"] = recursive ? "recursive" : "closed";
  config["N"] = c.levels;
  c.finish_config(config);
  ordered_json payload;
  payload["admissibility"] = admissibility_json(rep);
  payload["factors"] = ul_rows_json(f);
  emit(
      c, config, payload,
      [&](std::ostream& os) {
        os << "admissible: yes, delta " << g10(rep.delta) << ", x0 + mu0_tilde limit "
           << g10(rep.upper_limit) << "\n";
        print_ul_table(os, f);
      },
      [&](std::ostream& os) { write_ul_csv(os, f); });
  return 0;
}

int run_darboux(const Common& c, bool lu, double mu0_hat, double x0, double mu0_tilde) {
  ParsedProcess pp = c.resolve();
  SeriesOptions so = c.series_options();
  long n = c.levels;
  BirthDeathProcess q = lu ? lu_darboux(pp.process, mu0_hat, n + 1, so)
                           : ul_darboux(pp.process, x0, mu0_tilde, n, so);
  ordered_json config = c.config("darboux", pp);
  config["factorization"] = lu ? "lu" : "ul";
  if (lu) {
    config["mu0_hat"] = mu0_hat;
  } else {
    config["x0"] = x0;
    config["mu0_tilde"] = mu0_tilde;
  }
  config["N"] = c.levels;
  c.finish_config(config);
  ordered_json payload;
  payload["transformed_mu0"] = q.mu0();
  ordered_json rows = ordered_json::array();
  for (long k = 0; k <= n; ++k) {
    ordered_json row;
    row["n"] = k;
    row["lambda"] = q.lambda(k);
    if (k >= 1)
      row["mu"] = q.mu(k);
    else
      row["mu"] = nullptr;
    rows.push_back(row);
  }
  payload["rates"] = rows;
  emit(
      c, config, payload,
      [&](std::ostream& os) {
        os << "transformed killing rate: " << g10(q.mu0()) << "\n";
        os << std::setw(5) << "n" << std::setw(18) << "lambda" << std::setw(18) << "mu"
           << "\n";
        for (long k = 0; k <= n; ++k)
          os << std::setw(5) << k << std::setw(18) << g10(q.lambda(k)) << std::setw(18)
             << (k >= 1 ? g10(q.mu(k)) : std::string("-")) << "\n";
      },
      [&](std::ostream& os) {
        os << "n,lambda,mu\n";
        for (long k = 0; k <= n; ++k) {
          os << k << ',' << detail::num17(q.lambda(k)) << ',';
          if (k >= 1) os << detail::num17(q.mu(k));
          os << "\n";
        }
      });
  return 0;
}

int run_poly(const Common& c, const std::string& family, long degree,
             const std::vector<double>& xs) {
  ParsedProcess pp = c.resolve();
  PolyFamily fam = family == "associated" ? PolyFamily::Associated : PolyFamily::Primary;
  PolynomialEvaluator e{&pp.process, fam};
  ordered_json config = c.config("poly", pp);
  config["family"] = family;
  config["n"] = degree;
  config["x"] = xs;
  c.finish_config(config);
  std::vector<Eigen::ArrayXd> values;
  values.reserve(xs.size());
  for (double x : xs) values.push_back(eval_family(e, degree, x));
  ordered_json payload;
  ordered_json out = ordered_json::array();
  for (size_t k = 0; k < xs.size(); ++k) {
    ordered_json one;
    one["x"] = xs[k];
    one["values"] = std::vector<double>(values[k].data(), values[k].data() + degree + 1);
    out.push_back(one);
  }
  payload["polynomials"] = out;
  emit(
      c, config, payload,
      [&](std::ostream& os) {
        os << std::setw(5) << "n";
        for (double x : xs) os << std::setw(18) << ("x=" + g10(x));
        os << "\n";
        for (long n = 0; n <= degree; ++n) {
          os << std::setw(5) << n;
          for (size_t k = 0; k < xs.size(); ++k) os << std::setw(18) << g10(values[k][n]);
          os << "\n";
        }
      },
      [&](std::ostream& os) {
        os << "family,n,x,value\n";
        for (size_t k = 0; k < xs.size(); ++k)
          for (long n = 0; n <= degree; ++n)
            os << family << ',' << n << ',' << detail::num17(xs[k]) << ','
               << detail::num17(values[k][n]) << "\n";
      });
  return 0;
}

int run_spectral_check(const Common& c, const std::string& transform, double mu0_hat,
                       double x0, double mu0_tilde, long n_top, double max_residual) {
  ParsedProcess pp = c.resolve();
  SeriesOptions so = c.series_options();
  std::optional<SpectralMeasure> base = preset_measure_from_spec(pp.echo);
  if (!base)
    throw DomainError("spectral-check needs a preset process with a closed-form measure");

  SpectralMeasure m = *base;
  BirthDeathProcess target = pp.process;
  ordered_json density_ref;
  density_ref["preset"] = pp.echo["preset"];
  density_ref["params"] = pp.echo["params"];
  density_ref["transform"] = transform;
  if (transform == "christoffel") {
    m = christoffel_transform(pp.process, m);
    target = lu_darboux(pp.process, mu0_hat, n_top + 1, so);
  } else if (transform == "geronimus") {
    m = geronimus_transform(pp.process, m, x0, mu0_tilde, so);
    target = ul_darboux(pp.process, x0, mu0_tilde, n_top + 1, so);
  }

  double mass = measure_total_mass(m);
  LogWeightLadder l = build_ladder(target, n_top);
  PolynomialEvaluator e{&target, PolyFamily::Primary};
  Eigen::MatrixXd res = Eigen::MatrixXd::Zero(n_top + 1, n_top + 1);
  double worst = 0.0;
  for (long i = 0; i <= n_top; ++i) {
    for (long j = i; j <= n_top; ++j) {
      double v = measure_integral(m, [&](double x) {
        Eigen::ArrayXd q = eval_family(e, j, x);
        return q[i] * q[j];
      });
      double scaled = std::exp(0.5 * (l.log_pi[i] + l.log_pi[j])) * v;
      double dev = std::abs(scaled - (i == j ? 1.0 : 0.0));
      res(i, j) = res(j, i) = dev;
      worst = std::max(worst, dev);
    }
  }
  bool pass = worst <= max_residual && std::abs(mass - 1.0) <= 1e-6;

  ordered_json config = c.config("spectral-check", pp);
  config["transform"] = transform;
  if (transform == "christoffel") config["mu0_hat"] = mu0_hat;
  if (transform == "geronimus") {
    config["x0"] = x0;
    config["mu0_tilde"] = mu0_tilde;
  }
  config["n"] = n_top;
  config["max_residual"] = max_residual;
  c.finish_config(config);

  ordered_json payload;
  payload["measure"] = measure_json(m, density_ref);
  payload["total_mass"] = mass;
  ordered_json rows = ordered_json::array();
  for (long i = 0; i <= n_top; ++i)
    rows.push_back(std::vector<double>(res.row(i).data(), res.row(i).data() + n_top + 1));
  payload["residuals"] = rows;
  payload["max_residual_found"] = worst;
  payload["pass"] = pass;
  emit(
      c, config, payload,
      [&](std::ostream& os) {
        os << "total mass: " << g10(mass) << "\n";
        os << "orthogonality residuals |<Q_i, Q_j> - delta_ij|:\n";
        for (long i = 0; i <= n_top; ++i) {
          for (long j = 0; j <= n_top; ++j) {
            char buf[16];
            std::snprintf(buf, sizeof buf, "%.2e", res(i, j));
            os << std::setw(11) << buf;
          }
          os << "\n";
        }
        os << "max residual: " << g10(worst) << " (bound " << g10(max_residual) << ") "
           << (pass ? "pass" : "FAIL") << "\n";
      },
      [&](std::ostream& os) {
        os << "i,j,residual\n";
        for (long i = 0; i <= n_top; ++i)
          for (long j = 0; j <= n_top; ++j)
            os << i << ',' << j << ',' << detail::num17(res(i, j)) << "\n";
      });
  return pass ? 0 : 1;
}

int run_simulate(const Common& c, const std::string& quantity, long i, long n, long j,
                 double t, long trials, std::uint64_t seed, bool has_n, bool has_j,
                 bool has_t) {
  ParsedProcess pp = c.resolve();
  McOptions opt;
  opt.trials = trials;
  opt.seed = seed;
  auto need = [&](bool ok, const char* what) {
    if (!ok) throw DomainError(std::string("quantity '") + quantity + "' needs " + what);
  };
  SimulationEstimate est;
  if (quantity == "hitting-mean") {
    need(has_n, "--n (start state, hits n+1)");
    est = estimate_hitting_mean(pp.process, n, opt);
  } else if (quantity == "conditional-hitting") {
    need(has_n, "--n (start state, hits n+1)");
    est = estimate_conditional_hitting(pp.process, n, opt);
  } else if (quantity == "absorption-prob") {
    need(has_n, "--n (upper barrier)");
    est = estimate_absorption_prob(pp.process, i, n, opt);
  } else if (quantity == "occupation-time") {
    need(has_n, "--n (occupied top state)");
    est = estimate_occupation_time(pp.process, i, n, opt);
  } else if (quantity == "extinction-prob") {
    est = estimate_extinction_prob(pp.process, i, opt);
  } else {
    need(has_j, "--j (target state)");
    need(has_t, "--t (time horizon)");
    est = estimate_transition_prob(pp.process, i, j, t, opt);
  }
  ordered_json config = c.config("simulate", pp);
  config["quantity"] = quantity;
  config["i"] = i;
  if (has_n) config["n"] = n;
  if (has_j) config["j"] = j;
  if (has_t) config["t"] = t;
  config["trials"] = trials;
  config["seed"] = seed;
  c.finish_config(config);
  ordered_json payload;
  payload["estimate"]["quantity"] = to_string(est.quantity);
  payload["estimate"]["mean"] = est.mean;
  payload["estimate"]["std_error"] = est.std_error;
  payload["estimate"]["trials"] = est.trials;
  payload["estimate"]["accepted"] = est.accepted;
  payload["estimate"]["seed"] = est.seed;
  emit(
      c, config, payload,
      [&](std::ostream& os) {
        os << to_string(est.quantity) << ": " << g10(est.mean) << " +- "
           << g10(est.std_error) << " (" << est.accepted << "/" << est.trials
           << " trials, seed " << est.seed << ")\n";
      },
      [&](std::ostream& os) {
        os << "quantity,mean,std_error,trials,accepted,seed\n";
        os << to_string(est.quantity) << ',' << detail::num17(est.mean) << ','
           << detail::num17(est.std_error) << ',' << est.trials << ',' << est.accepted
           << ',' << est.seed << "\n";
      });
  return 0;
}

struct CheckRow {
  std::string name;
  double residual;
  double bound;
  bool pass;
  bool skipped = false;
};

int run_verify(const Common& c, bool lu, double mu0_hat, double x0, double mu0_tilde,
               double max_residual, double ortho_bound) {
  ParsedProcess pp = c.resolve();
  SeriesOptions so = c.series_options();
  const BirthDeathProcess& p = pp.process;
  long n = c.levels;
  std::vector<CheckRow> checks;

  Eigen::MatrixXd gen = truncated_generator(p, n + 1);
  double scale = std::max(1.0, gen.cwiseAbs().maxCoeff());

  Eigen::MatrixXd product, transformed;
  double transformed_mu0;
  if (lu) {
    LUFactors f = lu_factorize(p, mu0_hat, n, so);
    Eigen::MatrixXd lo = lu_lower_matrix(f, n + 1);
    Eigen::MatrixXd up = lu_upper_matrix(f, n + 1);
    product = lo * up;
    transformed = up * lo;
    transformed_mu0 = mu0_hat;
  } else {
    ULAdmissibility rep = ul_admissibility(p, x0, mu0_tilde, so);
    if (!rep.admissible) throw InadmissibleUL(rep.reason, -1, "x0 + mu0_tilde");
    ULFactors f = ul_factorize(p, x0, mu0_tilde, n, so);
    Eigen::MatrixXd up = ul_upper_matrix(f, n + 1);
    Eigen::MatrixXd lo = ul_lower_matrix(f, n + 1);
    product = up * lo;
    transformed = lo * up;
    transformed_mu0 = mu0_tilde;
  }

  // Reconstruction: the factor product against the truncated generator.  The
  // UL product misses one term in the bottom right corner, the truncation
  // artifact, so that entry stays out of the comparison.
  Eigen::MatrixXd dev = (product - gen).cwiseAbs();
  if (!lu) dev(n, n) = 0.0;
  checks.push_back({"reconstruction", dev.maxCoeff() / scale, max_residual, false});

  // Row sums of the transformed generator: -mu0 on row 0, zero below, with
  // the last row again lost to truncation.
  double worst_row = 0.0;
  for (long r = 0; r < n; ++r) {
    double target = r == 0 ? -transformed_mu0 : 0.0;
    worst_row = std::max(worst_row, std::abs(transformed.row(r).sum() - target));
  }
  checks.push_back({"row-sum", worst_row / scale, max_residual, false});

  std::optional<SpectralMeasure> base = preset_measure_from_spec(pp.echo);
  long ortho_n = std::min<long>(8, n);
  if (base) {
    double r0 = orthogonality_residual(*base, p, ortho_n);
    checks.push_back({"orthogonality-original", r0, ortho_bound, false});
    SpectralMeasure tm = lu ? christoffel_transform(p, *base)
                            : geronimus_transform(p, *base, x0, mu0_tilde, so);
    BirthDeathProcess tp = lu ? lu_darboux(p, mu0_hat, ortho_n + 1, so)
                              : ul_darboux(p, x0, mu0_tilde, ortho_n + 1, so);
    double r1 = orthogonality_residual(tm, tp, ortho_n);
    checks.push_back({"orthogonality-transformed", r1, ortho_bound, false});
  } else {
    checks.push_back({"orthogonality-original", 0.0, ortho_bound, true, true});
    checks.push_back({"orthogonality-transformed", 0.0, ortho_bound, true, true});
  }

  bool all_pass = true;
  for (CheckRow& row : checks) {
    if (!row.skipped) row.pass = row.residual <= row.bound;
    all_pass = all_pass && (row.pass || row.skipped);
  }

  ordered_json config = c.config("verify", pp);
  config["factorization"] = lu ? "lu" : "ul";
  if (lu) {
    config["mu0_hat"] = mu0_hat;
  } else {
    config["x0"] = x0;
    config["mu0_tilde"] = mu0_tilde;
  }
  config["N"] = n;
  config["max_residual"] = max_residual;
  config["orthogonality_bound"] = ortho_bound;
  c.finish_config(config);

  ordered_json payload;
  ordered_json rows = ordered_json::array();
  for (const CheckRow& row : checks) {
    ordered_json one;
    one["name"] = row.name;
    if (row.skipped) {
      one["status"] = "skipped";
    } else {
      one["residual"] = row.residual;
      one["bound"] = row.bound;
      one["status"] = row.pass ? "pass" : "fail";
    }
    rows.push_back(one);
  }
  payload["checks"] = rows;
  payload["pass"] = all_pass;
  emit(
      c, config, payload,
      [&](std::ostream& os) {
        os << std::left;
        os << std::setw(28) << "check" << std::setw(16) << "residual" << std::setw(12)
           << "bound" << "status" << "\n";
        for (const CheckRow& row : checks) {
          os << std::setw(28) << row.name;
          if (row.skipped) {
            os << std::setw(16) << "-" << std::setw(12) << "-" << "skipped";
          } else {
            os << std::setw(16) << g10(row.residual) << std::setw(12) << g10(row.bound)
               << (row.pass ? "pass" : "FAIL");
          }
          os << "\n";
        }
        os << std::right << (all_pass ? "all checks passed" : "CHECKS FAILED") << "\n";
      },
      [&](std::ostream& os) {
        os << "check,residual,bound,status\n";
        for (const CheckRow& row : checks) {
          os << row.name << ',';
          if (row.skipped) {
            os << ",,skipped\n";
          } else {
            os << detail::num17(row.residual) << ',' << detail::num17(row.bound) << ','
               << (row.pass ? "pass" : "fail") << "\n";
          }
        }
      });
  return all_pass ? 0 : 1;
}

int run_presets(const Common& c) {
  ordered_json config;
  config["command"] = "presets";
  config["format"] = c.json() ? "json" : c.format;
  ordered_json payload;
  ordered_json list = ordered_json::array();
  auto add = [&](const char* name, std::vector<std::string> params, const char* desc) {
    ordered_json one;
    one["name"] = name;
    one["params"] = params;
    one["description"] = desc;
    one["closed_form_measure"] = true;
    list.push_back(one);
  };
  add("mm1", {"lambda", "mu", "mu0"},
      "constant birth rate lambda and death rate mu, optional killing mu0 at state 0");
  add("mm_inf", {"lambda", "mu"},
      "constant birth rate lambda, death rate n mu; conservative");
  add("linear", {"lambda", "mu", "beta"},
      "birth rate (n + beta) lambda, death rate n mu; conservative");
  payload["presets"] = list;
  emit(
      c, config, payload,
      [&](std::ostream& os) {
        for (const auto& one : list)
          os << one["name"].get<std::string>() << ": "
             << one["description"].get<std::string>() << "\n";
      },
      [&](std::ostream& os) {
        os << "name,params,description\n";
        for (const auto& one : list) {
          std::string ps;
          for (const auto& q : one["params"]) {
            if (!ps.empty()) ps += ' ';
            ps += q.get<std::string>();
          }
          os << one["name"].get<std::string>() << ',' << ps << ",\""
             << one["description"].get<std::string>() << "\"\n";
        }
      });
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LU and UL factorizations of birth-death generators and their "
               "Darboux transformations"};
  app.require_subcommand(1);
  int rc = 0;

  auto* classify_cmd =
      app.add_subcommand("classify", "decide the recurrence regime from the rate series");
  Common classify_common;
  classify_common.attach(classify_cmd, false);
  classify_cmd->callback([&]() {
    rc = guarded(classify_common.json(), [&]() { return run_classify(classify_common); });
  });

  auto* flu = app.add_subcommand(
      "factorize-lu", "lower-upper factorization; CSV columns are frozen as "
                      "n,s_tilde,r_tilde,x_tilde,y_tilde,lambda_hat,mu_hat");
  Common flu_common;
  double flu_mu0_hat = 0.0;
  bool flu_recursive = false;
  flu_common.attach(flu, true);
  flu->add_option("--mu0-hat", flu_mu0_hat, "killing rate of the transformed process")
      ->capture_default_str();
  flu->add_flag("--recursive", flu_recursive,
                "use the continued-fraction recurrence route instead of the series route");
  flu->callback([&]() {
    rc = guarded(flu_common.json(), [&]() {
      return run_factorize_lu(flu_common, flu_mu0_hat, flu_recursive);
    });
  });

  auto* ful = app.add_subcommand(
      "factorize-ul", "upper-lower factorization; CSV columns are frozen as "
                      "n,x,y,s,r,u,lambda_tilde,mu_tilde");
  Common ful_common;
  double ful_x0 = 0.0, ful_mu0_tilde = 0.0;
  bool ful_recursive = false;
  ful_common.attach(ful, true);
  ful->add_option("--x0", ful_x0, "free parameter of the factorization")->required();
  ful->add_option("--mu0-tilde", ful_mu0_tilde,
                  "killing rate of the transformed process")
      ->capture_default_str();
  ful->add_flag("--recursive", ful_recursive,
                "use the continued-fraction recurrence route instead of the series route");
  ful->callback([&]() {
    rc = guarded(ful_common.json(), [&]() {
      return run_factorize_ul(ful_common, ful_x0, ful_mu0_tilde, ful_recursive);
    });
  });

  auto* dar = app.add_subcommand("darboux",
                                 "rates of the Darboux-transformed process (swap the "
                                 "factors and read off the new tridiagonal)");
  Common dar_common;
  bool dar_lu = false, dar_ul = false;
  double dar_mu0_hat = 0.0, dar_x0 = 0.0, dar_mu0_tilde = 0.0;
  dar_common.attach(dar, true);
  dar->add_flag("--lu", dar_lu, "transform through the lower-upper factorization");
  dar->add_flag("--ul", dar_ul, "transform through the upper-lower factorization");
  dar->add_option("--mu0-hat", dar_mu0_hat, "transformed killing rate (with --lu)")
      ->capture_default_str();
  auto* dar_x0_opt = dar->add_option("--x0", dar_x0, "free parameter (with --ul)");
  dar->add_option("--mu0-tilde", dar_mu0_tilde, "transformed killing rate (with --ul)")
      ->capture_default_str();
  dar->callback([&]() {
    rc = guarded(dar_common.json(), [&]() {
      if (dar_lu == dar_ul)
        throw DomainError("darboux needs exactly one of --lu, --ul");
      if (dar_ul && dar_x0_opt->count() == 0)
        throw DomainError("darboux --ul needs --x0");
      return run_darboux(dar_common, dar_lu, dar_mu0_hat, dar_x0, dar_mu0_tilde);
    });
  });

  auto* pol = app.add_subcommand("poly",
                                 "evaluate the birth-death polynomial family by the "
                                 "three-term recurrence");
  Common pol_common;
  std::string pol_family = "primary";
  long pol_degree = 10;
  std::vector<double> pol_xs;
  pol_common.attach(pol, false);
  pol->add_option("--family", pol_family, "primary or associated")
      ->check(CLI::IsMember({"primary", "associated"}))
      ->capture_default_str();
  pol->add_option("--n", pol_degree, "highest degree to evaluate")
      ->check(CLI::Range(0l, 200l))
      ->capture_default_str();
  pol->add_option("--x", pol_xs, "evaluation points (repeatable)")->required();
  pol->callback([&]() {
    rc = guarded(pol_common.json(), [&]() {
      return run_poly(pol_common, pol_family, pol_degree, pol_xs);
    });
  });

  auto* spc = app.add_subcommand("spectral-check",
                                 "orthogonality residual matrix of a closed-form "
                                 "measure against a polynomial family");
  Common spc_common;
  std::string spc_transform = "none";
  double spc_mu0_hat = 0.0, spc_x0 = 0.0, spc_mu0_tilde = 0.0, spc_max_res = 1e-7;
  long spc_n = 10;
  spc_common.attach(spc, false);
  spc->add_option("--transform", spc_transform,
                  "measure/family pair to test: none, christoffel, geronimus")
      ->check(CLI::IsMember({"none", "christoffel", "geronimus"}))
      ->capture_default_str();
  spc->add_option("--mu0-hat", spc_mu0_hat, "transformed killing rate (christoffel)")
      ->capture_default_str();
  auto* spc_x0_opt = spc->add_option("--x0", spc_x0, "free parameter (geronimus)");
  spc->add_option("--mu0-tilde", spc_mu0_tilde, "transformed killing rate (geronimus)")
      ->capture_default_str();
  spc->add_option("--n", spc_n, "highest polynomial index")
      ->check(CLI::Range(0l, 60l))
      ->capture_default_str();
  spc->add_option("--max-residual", spc_max_res, "pass bound on the residuals")
      ->capture_default_str();
  spc->callback([&]() {
    rc = guarded(spc_common.json(), [&]() {
      if (spc_transform == "geronimus" && spc_x0_opt->count() == 0)
        throw DomainError("spectral-check --transform geronimus needs --x0");
      return run_spectral_check(spc_common, spc_transform, spc_mu0_hat, spc_x0,
                                spc_mu0_tilde, spc_n, spc_max_res);
    });
  });

  auto* sim = app.add_subcommand("simulate",
                                 "Monte-Carlo estimates of stopping-time quantities");
  Common sim_common;
  std::string sim_quantity;
  long sim_i = 0, sim_n = 0, sim_j = 0;
  double sim_t = 0.0;
  long sim_trials = 100000;
  std::uint64_t sim_seed = 42;
  sim_common.attach(sim, false);
  sim->add_option("--quantity", sim_quantity,
                  "hitting-mean, conditional-hitting, absorption-prob, occupation-time, "
                  "extinction-prob, transition-prob")
      ->check(CLI::IsMember({"hitting-mean", "conditional-hitting", "absorption-prob",
                             "occupation-time", "extinction-prob", "transition-prob"}))
      ->required();
  sim->add_option("--i", sim_i, "start state")->capture_default_str();
  auto* sim_n_opt = sim->add_option("--n", sim_n, "target state");
  auto* sim_j_opt = sim->add_option("--j", sim_j, "target state (transition-prob)");
  auto* sim_t_opt = sim->add_option("--t", sim_t, "time horizon (transition-prob)");
  sim->add_option("--trials", sim_trials, "number of trials")->capture_default_str();
  sim->add_option("--seed", sim_seed, "RNG seed")->capture_default_str();
  sim->callback([&]() {
    rc = guarded(sim_common.json(), [&]() {
      return run_simulate(sim_common, sim_quantity, sim_i, sim_n, sim_j, sim_t,
                          sim_trials, sim_seed, sim_n_opt->count() > 0,
                          sim_j_opt->count() > 0, sim_t_opt->count() > 0);
    });
  });

  auto* ver = app.add_subcommand("verify",
                                 "reconstruction, row-sum and orthogonality suite for "
                                 "one factorization");
  Common ver_common;
  bool ver_lu = false, ver_ul = false;
  double ver_mu0_hat = 0.0, ver_x0 = 0.0, ver_mu0_tilde = 0.0;
  double ver_max_res = 1e-9, ver_ortho = 1e-7;
  ver_common.attach(ver, true);
  ver->add_flag("--lu", ver_lu, "verify the lower-upper factorization");
  ver->add_flag("--ul", ver_ul, "verify the upper-lower factorization");
  ver->add_option("--mu0-hat", ver_mu0_hat, "transformed killing rate (with --lu)")
      ->capture_default_str();
  auto* ver_x0_opt = ver->add_option("--x0", ver_x0, "free parameter (with --ul)");
  ver->add_option("--mu0-tilde", ver_mu0_tilde, "transformed killing rate (with --ul)")
      ->capture_default_str();
  ver->add_option("--max-residual", ver_max_res, "bound on matrix residuals")
      ->capture_default_str();
  ver->add_option("--orthogonality-bound", ver_ortho,
                  "bound on spectral orthogonality residuals")
      ->capture_default_str();
  ver->callback([&]() {
    rc = guarded(ver_common.json(), [&]() {
      if (ver_lu == ver_ul) throw DomainError("verify needs exactly one of --lu, --ul");
      if (ver_ul && ver_x0_opt->count() == 0) throw DomainError("verify --ul needs --x0");
      return run_verify(ver_common, ver_lu, ver_mu0_hat, ver_x0, ver_mu0_tilde,
                        ver_max_res, ver_ortho);
    });
  });

  auto* pre = app.add_subcommand("presets", "list the built-in process families");
  Common pre_common;
  pre->add_option("--format", pre_common.format, "output format")
      ->check(CLI::IsMember({"table", "json", "csv"}))
      ->capture_default_str();
  pre->add_flag("--json", pre_common.json_flag, "shorthand for --format json");
  pre->callback([&]() {
    rc = guarded(pre_common.json(), [&]() { return run_presets(pre_common); });
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return rc;
}
