#pragma once

#include <stdexcept>
#include <string>

namespace dampplan {

enum class ErrorCode {
  InvalidArgument = 1,
  Parse,
  Validation,
  PoleHit,
  SingularBlock,
  SingularBranch,
  OutOfRange,
  NonConvergence,
  Infeasible,
  Io,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Planner/calibration failure that still carries how far off the target was.
class InfeasibleError : public Error {
 public:
  InfeasibleError(const std::string& what, double shortfall)
      : Error(ErrorCode::Infeasible, what), shortfall_(shortfall) {}

  double shortfall() const noexcept { return shortfall_; }

 private:
  double shortfall_;
};

}  // namespace dampplan
