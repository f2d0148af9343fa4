#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>

namespace yamabe {

enum class ErrorCode {
  kDomain = 1,
  kInvalidArgument,
  kDegenerateDomain,
  kFieldMismatch,
  kNonConvergence,
  kIndefiniteOperator,
  kNegativeEigenvectorComponent,
  kOrderingViolation,
  kOverflow,
  kNoStabilization,
  kMonotonicityViolation,
  kDegenerateWindow,
  kMMatrixViolation,
  kConfig,
  kIo,
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

// Short decimal rendering of a number for error messages.
inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, std::string(to_string(code)) + ": " + what);
}

}  // namespace yamabe
