#pragma once

// Path simulation for birth-death processes with killing at state 0.
// Randomness comes from a counter construction over the splitmix64 mixer,
// keyed by (seed, trial): trial t draws an independent stream no matter how
// many variates other trials consumed, so runs are reproducible under any
// scheduling and individual trials can be replayed.

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "bdarboux/errors.hpp"
#include "bdarboux/ladder.hpp"
#include "bdarboux/process.hpp"
#include "bdarboux/series.hpp"

namespace bdarboux {

class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t trial) {
    state_ = mix(seed ^ mix(trial ^ 0x8e9c31a7d2f6b853ull));
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    return mix(state_);
  }

  // Uniform on (0, 1]: 53 random bits, shifted away from zero.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1p-53;
  }

  double exponential(double rate) { return -std::log(uniform()) / rate; }

  bool bernoulli(double p) { return uniform() <= p; }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

enum class McQuantity {
  HittingMean,
  ConditionalHitting,
  AbsorptionProb,
  OccupationTime,
  ExtinctionProb,
  TransitionProb,
};

inline const char* to_string(McQuantity q) {
  switch (q) {
    case McQuantity::HittingMean: return "hitting-mean";
    case McQuantity::ConditionalHitting: return "conditional-hitting";
    case McQuantity::AbsorptionProb: return "absorption-prob";
    case McQuantity::OccupationTime: return "occupation-time";
    case McQuantity::ExtinctionProb: return "extinction-prob";
    case McQuantity::TransitionProb: return "transition-prob";
  }
  return "?";
}

struct SimulationEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  long trials = 0;
  long accepted = 0;
  std::uint64_t seed = 0;
  McQuantity quantity = McQuantity::HittingMean;
};

struct McOptions {
  long trials = 100000;
  std::uint64_t seed = 42;
  long event_cap = 10000000;
  long escape_ceiling = 60;  // surrogate-infinity state for extinction runs
};

struct PathEvent {
  double time = 0.0;
  long state = 0;
};

struct StopRule {
  enum class Kind { HitState, TimeHorizon, Absorbed } kind;
  long state = 0;
  double horizon = 0.0;

  static StopRule hit(long j) { return {Kind::HitState, j, 0.0}; }
  static StopRule time_horizon(double t) { return {Kind::TimeHorizon, 0, t}; }
  static StopRule absorbed() { return {Kind::Absorbed, 0, 0.0}; }
};

namespace detail {

// One exponential holding time and jump.  Returns the new state, -1 meaning
// absorbed.  Accumulates elapsed time into t.
inline long jump(const BirthDeathProcess& p, long state, CounterRng& rng, double& t) {
  double lam = p.lambda(state);
  double mu = (state == 0) ? p.mu0() : p.mu(state);
  double total = lam + mu;
  t += rng.exponential(total);
  if (rng.bernoulli(lam / total)) return state + 1;
  return state - 1;
}

inline void check_trials(long trials) {
  if (trials < 100) throw DomainError("estimators need at least 100 trials");
}

}  // namespace detail

// One realized trajectory, starting with the event (0, start).  Consecutive
// states differ by one; -1 is terminal.
inline std::vector<PathEvent> sample_path(const BirthDeathProcess& p, long start,
                                          const StopRule& stop, std::uint64_t seed,
                                          std::uint64_t trial = 0,
                                          long event_cap = 10000000) {
  if (start < 0) throw DomainError("sample_path needs start >= 0");
  CounterRng rng(seed, trial);
  std::vector<PathEvent> path;
  path.push_back({0.0, start});
  long state = start;
  double t = 0.0;
  long events = 0;
  for (;;) {
    switch (stop.kind) {
      case StopRule::Kind::HitState:
        if (state == stop.state) return path;
        break;
      case StopRule::Kind::TimeHorizon:
        break;
      case StopRule::Kind::Absorbed:
        break;
    }
    if (state < 0) return path;
    long next = detail::jump(p, state, rng, t);
    if (stop.kind == StopRule::Kind::TimeHorizon && t > stop.horizon) return path;
    state = next;
    path.push_back({t, state});
    if (++events > event_cap) throw RuntimeCap(event_cap, static_cast<long>(trial));
  }
}

// Mean first passage time from n to n+1 for a chain without killing.
inline SimulationEstimate estimate_hitting_mean(const BirthDeathProcess& p, long n,
                                                const McOptions& opt = {}) {
  if (!p.conservative())
    throw DomainError("unconditional hitting estimator needs mu0 = 0");
  if (n < 0) throw DomainError("estimate_hitting_mean needs n >= 0");
  detail::check_trials(opt.trials);
  double mean = 0.0, m2 = 0.0;
  for (long trial = 0; trial < opt.trials; ++trial) {
    CounterRng rng(opt.seed, static_cast<std::uint64_t>(trial));
    long state = n;
    double t = 0.0;
    long events = 0;
    while (state != n + 1) {
      state = detail::jump(p, state, rng, t);
      if (++events > opt.event_cap) throw RuntimeCap(opt.event_cap, trial);
    }
    double d = t - mean;
    mean += d / (trial + 1);
    m2 += d * (t - mean);
  }
  SimulationEstimate r;
  r.mean = mean;
  r.std_error = std::sqrt(m2 / (static_cast<double>(opt.trials) - 1.0) / opt.trials);
  r.trials = opt.trials;
  r.accepted = opt.trials;
  r.seed = opt.seed;
  r.quantity = McQuantity::HittingMean;
  return r;
}

// Mean of tau_{n+1} over the trials where n+1 is reached before absorption,
// for a killed chain.  Fewer than 100 surviving trials is an error.
inline SimulationEstimate estimate_conditional_hitting(const BirthDeathProcess& p, long n,
                                                       const McOptions& opt = {}) {
  if (p.conservative())
    throw DomainError("conditional hitting estimator needs mu0 > 0");
  if (n < 0) throw DomainError("estimate_conditional_hitting needs n >= 0");
  detail::check_trials(opt.trials);
  double mean = 0.0, m2 = 0.0;
  long accepted = 0;
  for (long trial = 0; trial < opt.trials; ++trial) {
    CounterRng rng(opt.seed, static_cast<std::uint64_t>(trial));
    long state = n;
    double t = 0.0;
    long events = 0;
    while (state != n + 1 && state >= 0) {
      state = detail::jump(p, state, rng, t);
      if (++events > opt.event_cap) throw RuntimeCap(opt.event_cap, trial);
    }
    if (state != n + 1) continue;
    ++accepted;
    double d = t - mean;
    mean += d / accepted;
    m2 += d * (t - mean);
  }
  if (accepted < 100) throw TooFewAccepted(accepted, 100);
  SimulationEstimate r;
  r.mean = mean;
  r.std_error = std::sqrt(m2 / (static_cast<double>(accepted) - 1.0) / accepted);
  r.trials = opt.trials;
  r.accepted = accepted;
  r.seed = opt.seed;
  r.quantity = McQuantity::ConditionalHitting;
  return r;
}

// Fraction of trials reaching state n before absorption, started from i.
inline SimulationEstimate estimate_absorption_prob(const BirthDeathProcess& p, long i,
                                                   long n, const McOptions& opt = {}) {
  if (p.conservative())
    throw DomainError("absorption-race estimator needs mu0 > 0");
  if (i < 0 || i > n) throw DomainError("estimate_absorption_prob needs 0 <= i <= n");
  detail::check_trials(opt.trials);
  long hits = 0;
  for (long trial = 0; trial < opt.trials; ++trial) {
    CounterRng rng(opt.seed, static_cast<std::uint64_t>(trial));
    long state = i;
    double t = 0.0;
    long events = 0;
    while (state != n && state >= 0) {
      state = detail::jump(p, state, rng, t);
      if (++events > opt.event_cap) throw RuntimeCap(opt.event_cap, trial);
    }
    if (state == n) ++hits;
  }
  double ph = static_cast<double>(hits) / opt.trials;
  SimulationEstimate r;
  r.mean = ph;
  r.std_error = std::sqrt(ph * (1.0 - ph) / opt.trials);
  r.trials = opt.trials;
  r.accepted = opt.trials;
  r.seed = opt.seed;
  r.quantity = McQuantity::AbsorptionProb;
  return r;
}

// Mean total time spent in state n before absorption, started from i, with
// the chain truncated at n: the birth rate out of n is forced to zero, so n
// is the top state.  i = -1 means already absorbed.
inline SimulationEstimate estimate_occupation_time(const BirthDeathProcess& p, long i,
                                                   long n, const McOptions& opt = {}) {
  if (p.conservative())
    throw DomainError("occupation-time estimator needs mu0 > 0");
  if (i > n || i < -1) throw DomainError("estimate_occupation_time needs -1 <= i <= n");
  if (n < 0) throw DomainError("estimate_occupation_time needs n >= 0");
  detail::check_trials(opt.trials);
  double mean = 0.0, m2 = 0.0;
  for (long trial = 0; trial < opt.trials; ++trial) {
    CounterRng rng(opt.seed, static_cast<std::uint64_t>(trial));
    long s = i;
    double occupied = 0.0;
    long events = 0;
    while (s >= 0) {
      long prev = s;
      double hold = 0.0;
      if (s == n) {
        // Truncated top state: only the down (or killing) move remains.
        double rate = (s == 0) ? p.mu0() : p.mu(s);
        hold = rng.exponential(rate);
        s -= 1;
      } else {
        s = detail::jump(p, s, rng, hold);
      }
      if (prev == n) occupied += hold;
      if (++events > opt.event_cap) throw RuntimeCap(opt.event_cap, trial);
    }
    long k = trial + 1;
    double d = occupied - mean;
    mean += d / k;
    m2 += d * (occupied - mean);
  }
  SimulationEstimate r;
  r.mean = mean;
  r.std_error = std::sqrt(m2 / (static_cast<double>(opt.trials) - 1.0) / opt.trials);
  r.trials = opt.trials;
  r.accepted = opt.trials;
  r.seed = opt.seed;
  r.quantity = McQuantity::OccupationTime;
  return r;
}

// Probability that a transient chain without killing ever returns to state 0
// from state i.  Paths are cut at a ceiling standing in for infinity; the
// ceiling starts at escape_ceiling and is raised until the escape mass above
// it is under a tenth of the worst-case binomial standard error, so the
// truncation bias stays invisible next to the Monte Carlo noise.
inline SimulationEstimate estimate_extinction_prob(const BirthDeathProcess& p, long i,
                                                   const McOptions& opt = {}) {
  if (!p.conservative())
    throw DomainError("extinction estimator needs mu0 = 0");
  if (i < 0) throw DomainError("estimate_extinction_prob needs i >= 0");
  detail::check_trials(opt.trials);
  SeriesVerdict a = series_A(p);
  if (a.kind != SeriesKind::Finite)
    throw DomainError("extinction probability needs a transient chain (A finite)");
  long ceiling = std::max(opt.escape_ceiling, i + 1);
  double budget = 0.1 * 0.5 / std::sqrt(static_cast<double>(opt.trials));
  for (;;) {
    LogWeightLadder l = build_ladder(p, ceiling);
    Eigen::ArrayXd esc = escape_partial_sums(p, l);
    double bias = (a.value - esc[ceiling]) / a.value;
    if (bias <= budget || ceiling >= 100000) break;
    ceiling *= 2;
  }
  long hits = 0;
  for (long trial = 0; trial < opt.trials; ++trial) {
    CounterRng rng(opt.seed, static_cast<std::uint64_t>(trial));
    long state = i;
    double t = 0.0;
    long events = 0;
    while (state != 0 && state < ceiling) {
      state = detail::jump(p, state, rng, t);
      if (++events > opt.event_cap) throw RuntimeCap(opt.event_cap, trial);
    }
    if (state == 0) ++hits;
  }
  double ph = static_cast<double>(hits) / opt.trials;
  SimulationEstimate r;
  r.mean = ph;
  r.std_error = std::sqrt(ph * (1.0 - ph) / opt.trials);
  r.trials = opt.trials;
  r.accepted = opt.trials;
  r.seed = opt.seed;
  r.quantity = McQuantity::ExtinctionProb;
  return r;
}

// Probability of sitting at state j at time t_end, started from i.
inline SimulationEstimate estimate_transition_prob(const BirthDeathProcess& p, long i,
                                                   long j, double t_end,
                                                   const McOptions& opt = {}) {
  if (!(t_end > 0.0)) throw DomainError("transition estimator needs t_end > 0");
  if (i < 0) throw DomainError("estimate_transition_prob needs i >= 0");
  detail::check_trials(opt.trials);
  long hits = 0;
  for (long trial = 0; trial < opt.trials; ++trial) {
    CounterRng rng(opt.seed, static_cast<std::uint64_t>(trial));
    long state = i;
    double t = 0.0;
    long events = 0;
    while (state >= 0) {
      double t_before = t;
      long next = detail::jump(p, state, rng, t);
      if (t >= t_end) {
        t = t_before;
        break;
      }
      state = next;
      if (++events > opt.event_cap) throw RuntimeCap(opt.event_cap, trial);
    }
    if (state == j) ++hits;
  }
  double ph = static_cast<double>(hits) / opt.trials;
  SimulationEstimate r;
  r.mean = ph;
  r.std_error = std::sqrt(ph * (1.0 - ph) / opt.trials);
  r.trials = opt.trials;
  r.accepted = opt.trials;
  r.seed = opt.seed;
  r.quantity = McQuantity::TransitionProb;
  return r;
}

}  // namespace bdarboux
