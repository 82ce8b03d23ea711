#pragma once

#include <stdexcept>
#include <string>

namespace ideaflow {

// Base of every error raised by the library. The CLI maps any of these to a
// nonzero exit code and prints what().
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation (p <= 0, x = NaN, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Time outside the span covered by a series or path.
class SpanError : public Error {
 public:
  using Error::Error;
};

// Times given in the wrong order (t1 >= t2 and friends).
class OrderingError : public Error {
 public:
  using Error::Error;
};

// Closed-form propagation hit A^beta <= 0 (negative beta blow-down).
class SingularityError : public Error {
 public:
  SingularityError(const std::string& what, double critical_time)
      : Error(what), critical_time_(critical_time) {}

  double critical_time() const noexcept { return critical_time_; }

 private:
  double critical_time_;
};

// A root search found no parameter value reproducing the data.
class NoSolutionError : public Error {
 public:
  using Error::Error;
};

// Output series not strictly increasing where the estimator requires it.
class IncreasingOutputError : public Error {
 public:
  using Error::Error;
};

// Regression design with (numerically) collinear columns.
class SingularDesignError : public Error {
 public:
  using Error::Error;
};

// Fewer data points than free parameters.
class IdentificationError : public Error {
 public:
  using Error::Error;
};

// Every optimizer restart failed.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

// An MCMC sampler found no starting point with finite posterior density.
class InitializationError : public Error {
 public:
  using Error::Error;
};

// Parameters violate a model constraint (Feller admissibility, ...).
class ConstraintError : public Error {
 public:
  using Error::Error;
};

// Malformed input file. line() is 1-based, 0 when the error is not tied to a line.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

  // Same error with `context: ` (typically the file name) in front of the message.
  ParseError with_context(const std::string& context) const { return ParseError(context + ": " + what(), line_, 0); }

 private:
  ParseError(const std::string& full, std::size_t line, int) : Error(full), line_(line) {}

  std::size_t line_;
};

// Bad run configuration (unknown key, missing field).
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace ideaflow
