#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pfam {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t offset)
      : Error(message + " at offset " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Arithmetic outside a function's domain (log of a nonpositive number,
/// division by zero, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Raised when a derivative is requested through a `step` node.
class DifferentiationError : public Error {
 public:
  using Error::Error;
};

class QuadratureError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition of an operation does not hold.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Malformed scenario or inconsistent configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// The input family is closed but not exact on the given cover.
class NotExactError : public Error {
 public:
  NotExactError(const std::string& message, double defect)
      : Error(message), defect_(defect) {}
  double defect() const noexcept { return defect_; }

 private:
  double defect_;
};

}  // namespace pfam
