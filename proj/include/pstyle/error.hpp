// Copyright 2026 The pstyle Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace pstyle {

/// Base of every error raised by the library. The CLI maps each subclass to a
/// distinct exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user configuration (unknown block ids, bad weights, bad flags).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A domain invariant does not hold for the supplied data.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// An image is too small for the requested feature blocks.
class SizingError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Invalid function argument (empty lists, mismatched lengths).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Non-finite loss, gradient or estimator output.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Missing files, malformed archives, version mismatches.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace pstyle
