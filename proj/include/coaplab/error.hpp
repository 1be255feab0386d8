#pragma once

#include <stdexcept>
#include <string>

namespace coaplab {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CodecError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class CaptureError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

/// Frobenius normalization of an all-zero matrix.
class NormalizationError : public DataError {
 public:
  using DataError::DataError;
};

/// Raised when training produces non-finite parameters or loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace coaplab
