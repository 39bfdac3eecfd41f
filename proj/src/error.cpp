#include "dampplan/error.hpp"

namespace dampplan {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid argument";
    case ErrorCode::Parse: return "parse error";
    case ErrorCode::Validation: return "validation error";
    case ErrorCode::PoleHit: return "pole hit";
    case ErrorCode::SingularBlock: return "singular block";
    case ErrorCode::SingularBranch: return "singular branch impedance";
    case ErrorCode::OutOfRange: return "out of range";
    case ErrorCode::NonConvergence: return "non-convergence";
    case ErrorCode::Infeasible: return "infeasible";
    case ErrorCode::Io: return "i/o error";
  }
  return "unknown error";
}

}  // namespace dampplan
