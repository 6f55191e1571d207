#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace facecoder {

enum class ErrorKind {
  InvalidArgument,
  DegenerateGeometry,
  MagicMismatch,
  Truncated,
  InvariantViolation,
  Parse,
  Io,
  Numerical,
  InitializationFailure,
};

const char* to_string(ErrorKind kind);

/// Base exception for every failure the library reports.
///
/// `section` names the part of an input that failed (a file section, a JSON
/// key, a config key) and `vertex` identifies the offending vertex for
/// geometry errors. Both are optional.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, std::string section = {},
        std::optional<std::uint32_t> vertex = std::nullopt);

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& section() const noexcept { return section_; }
  std::optional<std::uint32_t> vertex() const noexcept { return vertex_; }

 private:
  ErrorKind kind_;
  std::string section_;
  std::optional<std::uint32_t> vertex_;
};

[[noreturn]] void throw_invalid_argument(const std::string& message);

}  // namespace facecoder
