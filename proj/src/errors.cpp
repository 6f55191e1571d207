#include "facecoder/errors.hpp"

namespace facecoder {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::DegenerateGeometry: return "degenerate-geometry";
    case ErrorKind::MagicMismatch: return "magic-mismatch";
    case ErrorKind::Truncated: return "truncated";
    case ErrorKind::InvariantViolation: return "invariant-violation";
    case ErrorKind::Parse: return "parse-error";
    case ErrorKind::Io: return "io-error";
    case ErrorKind::Numerical: return "numerical-failure";
    case ErrorKind::InitializationFailure: return "initialization-failure";
  }
  return "unknown";
}

namespace {
std::string decorate(ErrorKind kind, const std::string& message, const std::string& section) {
  std::string out = std::string(to_string(kind)) + ": " + message;
  if (!section.empty()) out += " [" + section + "]";
  return out;
}
}  // namespace

Error::Error(ErrorKind kind, const std::string& message, std::string section,
             std::optional<std::uint32_t> vertex)
    : std::runtime_error(decorate(kind, message, section)),
      kind_(kind),
      section_(std::move(section)),
      vertex_(vertex) {}

void throw_invalid_argument(const std::string& message) {
  throw Error(ErrorKind::InvalidArgument, message);
}

}  // namespace facecoder
