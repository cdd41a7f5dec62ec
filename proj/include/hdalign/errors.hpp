#pragma once

#include <stdexcept>
#include <string>

namespace hdalign {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes disagree (vector widths, feature length).
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Malformed or truncated binary/text input.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Structurally valid input that violates a domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Access to a column that lies in a disabled bank.
class GatingError : public Error {
 public:
  using Error::Error;
};

// Accumulators were built under a different bank mask; a full scan is required.
class StaleStateError : public Error {
 public:
  using Error::Error;
};

// The flip set exceeded the index FIFO; the caller must fall back to a full scan.
class FallbackRequired : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace hdalign
