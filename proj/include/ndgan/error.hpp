#pragma once

#include <stdexcept>
#include <string>

namespace ndgan {

enum class ErrorCode {
  shape,          // operand shapes do not conform
  domain,         // value outside an operation's mathematical domain
  invalid_argument,
  non_finite,     // NaN/Inf produced or supplied
  format,         // malformed file or document
  io,
};

const char* to_string(ErrorCode code);

/// Every failure raised by the library. `where` names the operation, file or
/// parameter that failed so callers can report it without parsing `what()`.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string where, const std::string& message)
      : std::runtime_error(where + ": " + message), code_(code), where_(std::move(where)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& where() const noexcept { return where_; }

 private:
  ErrorCode code_;
  std::string where_;
};

}  // namespace ndgan
