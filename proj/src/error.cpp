#include "chanorm/error.hpp"

namespace chanorm {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NotFound: return "NotFound";
    case ErrorKind::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorKind::SignalTooShort: return "SignalTooShort";
    case ErrorKind::InvalidSmoothing: return "InvalidSmoothing";
    case ErrorKind::InvalidParameter: return "InvalidParameter";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::SchemaMismatch: return "SchemaMismatch";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::Io: return "Io";
  }
  return "Error";
}

}  // namespace chanorm
