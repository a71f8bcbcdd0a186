#pragma once

#include <stdexcept>
#include <string>

namespace pgma {

// Failure classes. The CLI maps each one to a distinct exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad flags, inconsistent options, missing prerequisites such as labels.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Unreadable files, malformed CSV cells, shape mismatches in inputs.
class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite gradients, diverging losses.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace pgma
