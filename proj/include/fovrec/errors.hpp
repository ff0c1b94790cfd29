#pragma once

#include <stdexcept>
#include <string>

namespace fovrec {

// Precondition or contract violation on caller-supplied data.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

// File missing, unreadable, or malformed on disk.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// An iterative procedure failed to produce a usable result.
class ConvergenceError : public std::runtime_error {
 public:
  explicit ConvergenceError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace fovrec
