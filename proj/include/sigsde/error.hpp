#pragma once

#include <stdexcept>
#include <string>

namespace sigsde {

/// Broad failure categories. The CLI maps them onto process exit codes.
enum class ErrorKind {
  invalid_argument,
  out_of_range,
  invalid_state,
  degenerate_data,
  numeric,
  divergence,
  parse,
  io,
  validation,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::invalid_argument: return "invalid argument";
    case ErrorKind::out_of_range: return "out of range";
    case ErrorKind::invalid_state: return "invalid state";
    case ErrorKind::degenerate_data: return "degenerate data";
    case ErrorKind::numeric: return "numeric error";
    case ErrorKind::divergence: return "divergence";
    case ErrorKind::parse: return "parse error";
    case ErrorKind::io: return "i/o error";
    case ErrorKind::validation: return "validation error";
  }
  return "error";
}

}  // namespace sigsde
