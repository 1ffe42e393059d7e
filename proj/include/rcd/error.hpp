#pragma once

#include <stdexcept>
#include <string>

namespace rcd {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or layer dimensions do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A scalar argument is outside its admissible range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Theory routines require isotropic (i.i.d. gaussian) filters.
class IsotropyError : public Error {
 public:
  using Error::Error;
};

/// The network uses a pooling kind the requested analysis does not cover.
class VariantError : public Error {
 public:
  using Error::Error;
};

/// A structural assumption (partition patches, single route, ...) is violated.
class AssumptionError : public Error {
 public:
  using Error::Error;
};

/// The input makes the quantity undefined (zero variance, epsilon ratio >= 1).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// Input data violates a documented precondition (e.g. non-positive pixels).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// File could not be read or written, or its contents are malformed.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace rcd
