#pragma once

#include <stdexcept>
#include <string>

namespace fhsc {

// Error categories map 1:1 onto CLI exit codes.
enum class ErrorKind { Validation = 2, Numeric = 3, Io = 4 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }
  int exit_code() const { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void throw_validation(const std::string& msg) { throw Error(ErrorKind::Validation, msg); }
[[noreturn]] inline void throw_numeric(const std::string& msg) { throw Error(ErrorKind::Numeric, msg); }
[[noreturn]] inline void throw_io(const std::string& msg) { throw Error(ErrorKind::Io, msg); }

// Warnings go to stderr; callers that need counts keep their own.
void log_warning(const std::string& msg);

}  // namespace fhsc
