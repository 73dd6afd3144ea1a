#pragma once

#include <stdexcept>
#include <string>

namespace mmdt {

/// Failure category. The CLI maps these onto process exit codes.
enum class ErrorKind {
  io,             // file missing / unreadable / unwritable
  parse,          // malformed JSON or CSV
  validation,     // input violates a model or option invariant
  incompatible,   // inputs are individually valid but do not fit together
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool ok, const std::string& what, ErrorKind kind = ErrorKind::validation) {
  if (!ok) throw Error(kind, what);
}

}  // namespace mmdt
