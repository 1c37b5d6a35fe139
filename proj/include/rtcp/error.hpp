#pragma once

#include <stdexcept>
#include <string>

namespace rtcp {

enum class ErrorKind {
  domain,      // argument outside a function's mathematical domain
  parse,       // malformed input file
  config,      // inconsistent or out-of-range options
  data,        // data that parse but cannot be modelled (non-finite, degenerate)
  numerical,   // non-finite intermediate results
  estimation,  // optimizer could not start or failed irrecoverably
  io,          // filesystem errors
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Raised when the likelihood of a single respondent becomes non-finite.
class RespondentError : public Error {
 public:
  RespondentError(ErrorKind kind, const std::string& what, long respondent)
      : Error(kind, what), respondent_(respondent) {}
  long respondent() const noexcept { return respondent_; }

 private:
  long respondent_;
};

// Process exit status for each error class; 0 is success and 1 is reserved
// for unexpected failures.
inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::parse: return 2;
    case ErrorKind::config: return 3;
    case ErrorKind::data: return 4;
    case ErrorKind::numerical: return 5;
    case ErrorKind::estimation: return 6;
    case ErrorKind::io: return 7;
    case ErrorKind::domain: return 8;
  }
  return 1;
}

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::domain: return "domain error";
    case ErrorKind::parse: return "parse error";
    case ErrorKind::config: return "config error";
    case ErrorKind::data: return "data error";
    case ErrorKind::numerical: return "numerical error";
    case ErrorKind::estimation: return "estimation error";
    case ErrorKind::io: return "io error";
  }
  return "error";
}

}  // namespace rtcp
