#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace medscale {

/// Error classes surfaced by the library. The CLI maps each to a distinct exit code.
enum class ErrorKind {
  invalid_argument,
  singular_design,
  separation,
  numeric,
  range,
  schema,
  empty_data,
  validation,
  engine,
  lookup,
  io,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid-argument";
    case ErrorKind::singular_design: return "singular-design";
    case ErrorKind::separation: return "separation";
    case ErrorKind::numeric: return "numeric";
    case ErrorKind::range: return "range";
    case ErrorKind::schema: return "schema";
    case ErrorKind::empty_data: return "empty-data";
    case ErrorKind::validation: return "validation";
    case ErrorKind::engine: return "engine";
    case ErrorKind::lookup: return "lookup";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

/// Process exit code for an error class; 0 is reserved for success and 1 for usage errors.
constexpr int exit_code(ErrorKind kind) noexcept {
  return 10 + static_cast<int>(kind);
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  /// Same error class with `context: ` prepended to the message.
  Error with_context(const std::string& context) const {
    return Error(kind_, context + ": " + what());
  }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) fail(kind, what);
}

}  // namespace medscale
