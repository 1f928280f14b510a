#pragma once

#include <stdexcept>
#include <string>

namespace cida {

// Base error for all library failures.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tensor/layer dimension mismatches and malformed structural arguments.
struct ShapeError : Error {
  using Error::Error;
};

// NaN/Inf, domain errors (log of non-positive, zero divisor), degenerate
// variances, aborted training. CLI exit code 3.
struct NumericError : Error {
  using Error::Error;
};

// Bad files: CSV rows, config keys, checkpoint headers. CLI exit code 2.
struct DataError : Error {
  using Error::Error;
};

// Command-line misuse. CLI exit code 1.
struct UsageError : Error {
  using Error::Error;
};

// A theory-oracle identity failed to hold. CLI exit code 4.
struct OracleError : Error {
  using Error::Error;
};

}  // namespace cida
