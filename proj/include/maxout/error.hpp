#pragma once

#include <stdexcept>
#include <string>

namespace maxout {

enum class ErrorKind {
  Shape,         // parameter/architecture dimensions disagree
  Config,        // invalid user input or configuration
  Precondition,  // operation called outside its domain
  Numerical,     // solver breakdown or non-finite arithmetic
  Io,            // file system failures
};

/// Error thrown by every fallible operation in the library.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Shape: return "shape";
    case ErrorKind::Config: return "config";
    case ErrorKind::Precondition: return "precondition";
    case ErrorKind::Numerical: return "numerical";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

}  // namespace maxout
