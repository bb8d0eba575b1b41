#pragma once

#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

namespace pgdro {

// Base class for every error raised by the library. Messages are single-line
// so the CLI can forward them verbatim.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape disagreement between two operands (matrix dims, vector lengths).
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Malformed or out-of-range input values.
class ValueError : public Error {
 public:
  using Error::Error;
};

// File-level failures: unreadable paths, malformed CSV cells, bad headers.
class IoError : public Error {
 public:
  using Error::Error;
};

namespace detail {

template <typename... Args>
std::string concat(Args&&... args) {
  std::ostringstream os;
  (os << ... << std::forward<Args>(args));
  return os.str();
}

}  // namespace detail

template <typename E = Error, typename... Args>
[[noreturn]] void fail(Args&&... args) {
  throw E(detail::concat(std::forward<Args>(args)...));
}

}  // namespace pgdro
