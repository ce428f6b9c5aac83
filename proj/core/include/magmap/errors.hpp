#pragma once

#include <stdexcept>
#include <string>

namespace magmap {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller-supplied value violates a documented precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A position lies outside the region the inducing grid can interpolate.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A dense computation would exceed the configured size cap.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// A symmetric factorization failed; usually cured by more jitter.
class FactorizationError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or a Krylov breakdown.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file.
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace magmap
