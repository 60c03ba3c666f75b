#pragma once

#include <stdexcept>
#include <string>

namespace distlift {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Caller passed something outside a documented precondition.
struct InvalidInputError : Error {
  using Error::Error;
};

// A numeric computation left the finite range (divergence, overflow).
struct NumericError : Error {
  using Error::Error;
};

// Geometry too degenerate to proceed (rank-deficient point set, zero-length
// reference segment, non-positive depth).
struct DegenerateGeometryError : Error {
  using Error::Error;
};

// Malformed structured-text input; carries file/line context in the message.
struct ParseError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace distlift
