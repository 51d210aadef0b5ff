#pragma once

#include <stdexcept>
#include <string>

namespace framesearch {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated (bad ratio, bad index, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Input data cannot support the requested computation
/// (too few samples, misaligned sequences, degenerate rows, parse errors).
class DataError : public Error {
 public:
  using Error::Error;
};

/// A frame request could not be completed (connection loss, protocol error).
class TransportError : public Error {
 public:
  using Error::Error;
};

}  // namespace framesearch
