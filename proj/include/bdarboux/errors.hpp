#pragma once

#include <stdexcept>
#include <string>

namespace bdarboux {

// A rate sequence produced a non-positive (or non-finite) value, or was
// queried outside the range a table-backed process covers.
class InvalidRates : public std::runtime_error {
 public:
  InvalidRates(const std::string& msg, long index)
      : std::runtime_error(msg + " (index " + std::to_string(index) + ")"),
        index_(index) {}
  long index() const { return index_; }

 private:
  long index_;
};

// The function handed to the Doob transform fails the numeric harmonicity
// check at some sampled state.
class NonHarmonic : public std::runtime_error {
 public:
  NonHarmonic(long state, double residual)
      : std::runtime_error("function is not harmonic at state " +
                           std::to_string(state) + ", scaled residual " +
                           std::to_string(residual)),
        state_(state),
        residual_(residual) {}
  long state() const { return state_; }
  double residual() const { return residual_; }

 private:
  long state_;
  double residual_;
};

// A convergence verdict was needed but the numeric engine could not decide
// within its term budget.
class UndeterminedSeries : public std::runtime_error {
 public:
  explicit UndeterminedSeries(const std::string& what_series)
      : std::runtime_error("series verdict undetermined: " + what_series) {}
};

// The requested absorption rate for the lower/upper factorization lies
// outside the admissible interval, detected either against the bound or by a
// sign change in the computed coefficients.
class InadmissibleMu0Hat : public std::runtime_error {
 public:
  InadmissibleMu0Hat(const std::string& reason, long index, double value)
      : std::runtime_error("inadmissible mu0_hat: " + reason),
        index_(index),
        value_(value) {}
  long index() const { return index_; }
  double value() const { return value_; }

 private:
  long index_;
  double value_;
};

// Upper/lower factorization parameters violate an admissibility condition.
class InadmissibleUL : public std::runtime_error {
 public:
  InadmissibleUL(const std::string& reason, long index, const std::string& which)
      : std::runtime_error("inadmissible UL parameters: " + reason),
        index_(index),
        which_(which) {}
  long index() const { return index_; }
  const std::string& which() const { return which_; }

 private:
  long index_;
  std::string which_;
};

// A conservative recurrent process admits no upper/lower factorization with
// positive rates: the free parameter interval is empty.
class ConservativeRecurrentBlocked : public std::runtime_error {
 public:
  ConservativeRecurrentBlocked()
      : std::runtime_error(
            "UL factorization impossible: process is conservative and "
            "recurrent, the admissible interval for x0 is empty") {}
};

// Requested a moment the measure does not have (e.g. inverse moment of a
// measure with an atom at the origin).
class DivergentMoment : public std::runtime_error {
 public:
  explicit DivergentMoment(const std::string& msg) : std::runtime_error(msg) {}
};

// A simulated path exceeded the event budget.
class RuntimeCap : public std::runtime_error {
 public:
  RuntimeCap(long cap, long trial)
      : std::runtime_error("simulation trial " + std::to_string(trial) +
                           " exceeded the event cap of " + std::to_string(cap)),
        trial_(trial) {}
  long trial() const { return trial_; }

 private:
  long trial_;
};

// A conditional estimator accepted too few trials to report a meaningful
// standard error.
class TooFewAccepted : public std::runtime_error {
 public:
  TooFewAccepted(long accepted, long required)
      : std::runtime_error("conditional estimator accepted " +
                           std::to_string(accepted) + " trials, need at least " +
                           std::to_string(required)) {}
};

// Argument outside the supported domain of a special function or evaluator.
class DomainError : public std::runtime_error {
 public:
  explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace bdarboux
