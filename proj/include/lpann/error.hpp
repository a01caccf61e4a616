#pragma once

#include <stdexcept>
#include <string>

namespace lpann {

/// Error categories. The CLI maps each to a stable exit code.
enum class ErrorKind {
  usage,         // exit 2
  io,            // exit 3
  numeric_range, // exit 4
  parse,         // exit 2
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error usage_error(const std::string& what) { return {ErrorKind::usage, what}; }
inline Error io_error(const std::string& what) { return {ErrorKind::io, what}; }
inline Error numeric_range_error(const std::string& what) { return {ErrorKind::numeric_range, what}; }
inline Error parse_error(const std::string& what) { return {ErrorKind::parse, what}; }

inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::usage:
    case ErrorKind::parse:
      return 2;
    case ErrorKind::io:
      return 3;
    case ErrorKind::numeric_range:
      return 4;
  }
  return 1;
}

}  // namespace lpann
