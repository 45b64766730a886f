#pragma once

#include <stdexcept>
#include <string>

namespace hintscout {

/// Base class for every error raised by the toolkit.  `exit_code()` is the
/// process status the CLI maps the error onto.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 2; }
};

/// Malformed input: bad magic, wrong rank, unparsable manifest.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Stream ended before the declared header or payload was complete.
class LengthError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// Values that parse but violate a domain invariant (NaN/Inf, N mismatch).
class ValidationError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// Tensor rank or matrix dimensions incompatible with the operation.
class ShapeError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// Manifest/dump inconsistencies.  Messages always name the layer.
class DumpError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// Writing a blob that holds a non-finite value.
class SerializationError : public Error {
 public:
  using Error::Error;
};

/// Numerical degeneracy: zero-variance layers, all-zero attention maps.
class DegenerateError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

/// A data structure handed to an emitter breaks its own invariants.
class InvariantError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 1; }
};

/// Bad argument values passed to an API function.
class ArgumentError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 64; }
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace hintscout
