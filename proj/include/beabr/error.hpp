#pragma once

#include <stdexcept>
#include <string>

namespace beabr {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad caller input: unknown bitrate, malformed parameter, etc.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A documented precondition of an operation was violated.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// File could not be parsed or violates its format contract.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Model or planner configuration is inconsistent (shape mismatch etc.).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A NaN/Inf showed up where a finite value is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Download ran past the end of a non-looping trace.
class TraceExhausted : public Error {
 public:
  using Error::Error;
};

}  // namespace beabr
