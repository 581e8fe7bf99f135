#pragma once

// Exception hierarchy shared by every module. Contract violations (bad shapes,
// out-of-range arguments) are reported with std::invalid_argument; everything
// below derives from sociallearn::Error so callers can map categories onto
// exit codes.

#include <stdexcept>
#include <string>

namespace sociallearn {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent configuration (bad JSON, missing keys, ranges).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input data problems: unreadable files, parse failures, short streams.
class DataError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public DataError {
 public:
  using DataError::DataError;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Power iteration ran out of iterations; carries the last residual.
class ConvergenceError : public NumericalError {
 public:
  ConvergenceError(const std::string& what, double residual)
      : NumericalError(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Random graph generation exhausted its retry budget.
class GenerationError : public Error {
 public:
  using Error::Error;
};

/// Likelihood models break the bounded log-ratio assumption on shared support.
class AssumptionViolation : public Error {
 public:
  using Error::Error;
};

/// Operation invoked in the wrong state (e.g. estimator still warming up).
class StateError : public Error {
 public:
  using Error::Error;
};

/// Quantity undefined for the requested arguments.
class DomainError : public Error {
 public:
  using Error::Error;
};

}  // namespace sociallearn
