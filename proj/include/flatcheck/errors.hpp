#ifndef FLATCHECK_ERRORS_HPP
#define FLATCHECK_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace flatcheck {

/// Base class for all flatcheck errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed expression, overflowing rational arithmetic, bad arity.
struct ExprError : Error {
  using Error::Error;
};

/// Numeric evaluation hit a domain violation (division by ~zero,
/// arcsin argument out of range, sqrt/log of a non-positive value).
/// Carries a printable description of the offending subterm.
struct EvalError : Error {
  EvalError(const std::string& what, std::string subterm)
      : Error(what + " in subterm: " + subterm), offending_subterm(std::move(subterm)) {}
  std::string offending_subterm;
};

/// No feasible sample point found under the model's domain assumptions.
struct SamplingError : Error {
  using Error::Error;
};

/// A rank or nullspace decision was not locally constant across samples;
/// the constant-dimension assumption is violated at the working tolerance.
struct DegeneracyError : Error {
  using Error::Error;
};

/// Model file is syntactically or semantically invalid.
struct ModelError : Error {
  ModelError(const std::string& what, int line = 0) : Error(format(what, line)), line_number(line) {}
  int line_number;

 private:
  static std::string format(const std::string& what, int line) {
    if (line <= 0) return what;
    return "line " + std::to_string(line) + ": " + what;
  }
};

/// A condition the theory guarantees failed to hold; indicates a bug
/// or a genuinely degenerate input that slipped past the other guards.
struct InternalError : Error {
  using Error::Error;
};

}  // namespace flatcheck

#endif
