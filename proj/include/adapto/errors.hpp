#pragma once

#include <stdexcept>
#include <string>

namespace adapto {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor extents.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition of an operation was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// A scalar argument lies outside its permitted range.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Model or training configuration violates an invariant.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed on-disk data (dataset files, checkpoints).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Well-formed data carrying an invalid value (e.g. an out-of-range label).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Training hit a non-finite loss.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace adapto
