// wellcast/errors.hpp — error taxonomy shared by all modules.
#pragma once

#include <stdexcept>
#include <string>

namespace wellcast {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad experiment/run configuration (unknown architecture, invalid ratios, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Problems with the data itself (duplicate dates, empty split, short column).
class DataError : public Error {
 public:
  using Error::Error;
};

// Input file does not carry a required column.
class SchemaError : public DataError {
 public:
  using DataError::DataError;
};

// An API precondition was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Shape/dimension disagreement between tensors.
class DimensionError : public ContractError {
 public:
  using ContractError::ContractError;
};

// Non-finite values where finite ones are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace wellcast
