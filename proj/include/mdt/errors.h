#pragma once

#include <stdexcept>
#include <string>

namespace mdt {

// Base for every error raised by the library. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes or dimensions that do not fit together.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A documented precondition was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf encountered in a loss, gradient, or sampling chain.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Unrecognized file format or version.
class FormatError : public Error {
 public:
  using Error::Error;
};

// File content disagrees with its declared shape or checksum.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

// Point sets without spatial extent cannot be aligned.
class DegeneracyError : public Error {
 public:
  using Error::Error;
};

} // namespace mdt
