#pragma once

#include <stdexcept>
#include <string>

namespace deltacert {

enum class ErrorCode {
  kInvalidArgument,
  kParse,
  kIo,
  kInfeasible,
  kNumerical,
  kRefused,
  kOracle,
};

const char* to_string(ErrorCode code) noexcept;

/// Exception type thrown by every library routine. The code survives the
/// trip through the C API as a status value.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool condition, const std::string& what) {
  if (!condition) fail(ErrorCode::kInvalidArgument, what);
}

}  // namespace deltacert
