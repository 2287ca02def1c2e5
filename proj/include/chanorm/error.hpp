#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace chanorm {

enum class ErrorKind {
  NotFound,
  UnsupportedFormat,
  SignalTooShort,
  InvalidSmoothing,
  InvalidParameter,
  InvalidConfig,
  ShapeMismatch,
  EmptyInput,
  SchemaMismatch,
  ParseError,
  Io,
};

std::string_view to_string(ErrorKind kind);

/// All library failures are reported as `chanorm::Error`; `kind()` lets callers
/// dispatch without parsing the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace chanorm
