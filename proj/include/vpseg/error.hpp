#pragma once

#include <stdexcept>
#include <string>

namespace vpseg {

enum class ErrorKind {
  invalid_argument,   // bad shapes, violated preconditions
  no_convergence,     // iterative solver exceeded its budget
  io,                 // file read/write failures
  empty_region,       // metric asked about an empty class
  state,              // consumed tape, missing cache, lock conflicts
};

// All library failures are reported through this type so callers can
// branch on `kind` and read the numeric payload (e.g. the residual of a
// solver that ran out of iterations).
class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, std::string msg, double value = 0.0)
      : std::runtime_error(std::move(msg)), kind(kind), value(value) {}

  ErrorKind kind;
  double value;
};

inline void require(bool cond, ErrorKind kind, const std::string& msg, double value = 0.0) {
  if (!cond) throw Error(kind, msg, value);
}

}  // namespace vpseg
