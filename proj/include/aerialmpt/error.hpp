#pragma once

#include <stdexcept>
#include <string>

namespace aerialmpt {

/// Base for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration, shape mismatch or violated precondition.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents (annotations, sidecars, checkpoints, manifests).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failures.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Training diverged or hit an unrecoverable numeric state.
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace aerialmpt
