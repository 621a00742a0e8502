#pragma once

#include <stdexcept>
#include <string>

namespace corpusforge {

/// Base class for every error the library raises.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or arguments, detected before any work starts.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// File or stream failure.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A stage failed part-way; on-disk state is left resumable.
class StageError : public Error {
 public:
  using Error::Error;
};

}  // namespace corpusforge
