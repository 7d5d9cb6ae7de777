#pragma once

#include <stdexcept>
#include <string>

namespace dmn {

// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tensor shape disagreement (reports both shapes in the message).
struct ShapeError : Error {
  using Error::Error;
};

// Out-of-range token id, class index or slot ordinal.
struct IndexError : Error {
  using Error::Error;
};

// Non-finite value produced or consumed by a tensor operation.
struct NumericError : Error {
  using Error::Error;
};

// API misuse: a precondition that is not a shape or index issue.
struct ContractError : Error {
  using Error::Error;
};

// Invalid configuration value or combination.
struct ConfigError : Error {
  using Error::Error;
};

// Malformed input text; message carries the offending line number.
struct ParseError : Error {
  using Error::Error;
};

// Filesystem read/write failure.
struct IoError : Error {
  using Error::Error;
};

}  // namespace dmn
