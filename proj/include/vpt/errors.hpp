#pragma once

#include <stdexcept>
#include <string>

namespace vpt {

// Base of every error thrown by the toolkit. The CLI maps the concrete
// subclasses onto process exit codes (usage 1, data 2, numeric 3).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad configuration, bad arguments, unknown keys or out-of-range options.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Tensor extents that do not fit together.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Malformed or missing files, inconsistent datasets.
class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite values, failed decompositions, degenerate statistics.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace vpt
