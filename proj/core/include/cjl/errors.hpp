#pragma once

#include <stdexcept>
#include <string>

namespace cjl {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Point outside a chart domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

// A caller-side contract was not met (corank mismatch, non-conjugate point, ...).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Step-size underflow, Newton stall after the allowed halvings, and similar.
class IntegrationError : public Error {
 public:
  using Error::Error;
};

// A geodesic left the chart before the requested parameter.
class TruncationError : public Error {
 public:
  TruncationError(const std::string& what, double exit_param)
      : Error(what), exit_param_(exit_param) {}
  double exit_param() const { return exit_param_; }

 private:
  double exit_param_;
};

// A tangent-space curve leaves V1 at exit_param.
class V1ExitError : public PreconditionError {
 public:
  V1ExitError(const std::string& what, double exit_param) : PreconditionError(what), exit_param_(exit_param) {}
  double exit_param() const { return exit_param_; }

 private:
  double exit_param_;
};

// Identification data that does not describe a valid aspirant curve.
class StructuralError : public Error {
 public:
  using Error::Error;
};

}  // namespace cjl
