#pragma once

#include <stdexcept>
#include <string>

namespace adar {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid hyperparameters or inconsistent run setup.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Array dimensions disagree (including stale optimizer state).
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// CSV/schema problems: missing columns, unparsable files.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// A NaN or infinity appeared during training.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Rule base is already at its maximum size.
class CapacityError : public Error {
 public:
  using Error::Error;
};

}  // namespace adar
