#pragma once

#include <stdexcept>
#include <string>

namespace heavytail {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A scalar argument is outside its admissible range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Matrix or vector dimensions disagree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Malformed input data (out-of-range indices, non-finite entries, bad files).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Data that is well-formed but carries no information for the requested
/// quantity, e.g. an all-zero column fed to a calibration equation.
class DegenerateDataError : public Error {
 public:
  using Error::Error;
};

/// A numerical routine failed: non-convergence, indefinite matrix, infeasible LP.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration (unknown keys, bad ranges, unknown identifiers).
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace heavytail
