#ifndef LMCE_ERRORS_HPP
#define LMCE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace lmce {

/// Base for all failures raised by the library. `code` is a stable
/// machine-readable identifier; `what()` carries the human-readable detail.
class Error : public std::runtime_error {
public:
  Error(std::string code, const std::string& msg)
      : std::runtime_error(msg), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

private:
  std::string code_;
};

/// Bad input: grid too small, invariant violated, config out of range.
class ValidationError : public Error {
public:
  ValidationError(std::string code, const std::string& msg)
      : Error(std::move(code), msg) {}
};

/// An iterative solve did not reach its tolerance. Carries the final residual
/// so callers can report it.
class SolveError : public Error {
public:
  SolveError(std::string code, const std::string& msg, double residual)
      : Error(std::move(code), msg), residual_(residual) {}
  double residual() const { return residual_; }

private:
  double residual_ = 0.0;
};

/// A corrugation stage could not be completed (under-resolution,
/// lost positive-definiteness, infeasible schedule).
class StageError : public Error {
public:
  StageError(std::string code, const std::string& msg)
      : Error(std::move(code), msg) {}
};

} // namespace lmce

#endif
