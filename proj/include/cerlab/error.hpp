// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace cerlab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument is outside the domain of the operation (bad index, empty input, ...).
class InputDomainError : public Error {
 public:
  using Error::Error;
};

/// Exhaustive enumeration was requested over more solutions than the configured cap.
class EnumerationTooLarge : public Error {
 public:
  using Error::Error;
};

/// A parameter update carried a non-finite scale or gradient entry.
class UpdateRejected : public Error {
 public:
  using Error::Error;
};

/// An inconsistent or out-of-range configuration value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A training step produced a non-finite gradient and was abandoned.
class TrainingAborted : public Error {
 public:
  using Error::Error;
};

}  // namespace cerlab
