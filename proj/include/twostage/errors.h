#pragma once

#include <stdexcept>
#include <string>

namespace twostage {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text. Carries the 1-based line number of the offending line.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// Input is well-formed but inconsistent with its own header (e.g. link count).
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// A value violates a model invariant (nonpositive capacity, negative demand...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the domain of a mathematical function.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// The requested operation is undefined for this configuration (e.g. the
/// inverse of a constant link cost).
class UnsupportedConfiguration : public Error {
 public:
  using Error::Error;
};

/// The instance cannot be solved as posed (unreachable OD pair, empty path set).
class ModelError : public Error {
 public:
  using Error::Error;
};

}  // namespace twostage
