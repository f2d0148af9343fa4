#include "yamabe/error.hpp"

namespace yamabe {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kDomain: return "DOMAIN_ERROR";
    case ErrorCode::kInvalidArgument: return "INVALID_ARGUMENT";
    case ErrorCode::kDegenerateDomain: return "DEGENERATE_DOMAIN";
    case ErrorCode::kFieldMismatch: return "FIELD_MISMATCH";
    case ErrorCode::kNonConvergence: return "NON_CONVERGENCE";
    case ErrorCode::kIndefiniteOperator: return "INDEFINITE_OPERATOR";
    case ErrorCode::kNegativeEigenvectorComponent: return "NEGATIVE_EIGENVECTOR_COMPONENT";
    case ErrorCode::kOrderingViolation: return "ORDERING_VIOLATION";
    case ErrorCode::kOverflow: return "OVERFLOW";
    case ErrorCode::kNoStabilization: return "NO_STABILIZATION";
    case ErrorCode::kMonotonicityViolation: return "MONOTONICITY_VIOLATION";
    case ErrorCode::kDegenerateWindow: return "DEGENERATE_WINDOW";
    case ErrorCode::kMMatrixViolation: return "M_MATRIX_VIOLATION";
    case ErrorCode::kConfig: return "CONFIG_ERROR";
    case ErrorCode::kIo: return "IO_ERROR";
  }
  return "UNKNOWN_ERROR";
}

}  // namespace yamabe
