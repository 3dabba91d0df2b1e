#pragma once

#include <stdexcept>
#include <string>

namespace trendcast {

/// Base class for every error this library throws.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed input text: bad CSV rows, unparseable dates or numbers.
struct ParseError : Error {
  using Error::Error;
};

/// Two bars share the same calendar date.
struct DuplicateDateError : ParseError {
  using ParseError::ParseError;
};

/// An argument is outside an operation's domain (bad window, empty grid, ...).
struct ParameterError : Error {
  using Error::Error;
};

/// Dimension or length mismatch between related containers.
struct ShapeError : ParameterError {
  using ParameterError::ParameterError;
};

/// high == low: a bar carries no range information.
struct DegenerateRangeError : ParameterError {
  using ParameterError::ParameterError;
};

/// A feature column is constant on the slice used to fit statistics.
struct DegenerateFeatureError : ParameterError {
  using ParameterError::ParameterError;
};

/// Training or membership input contains only one class.
struct ClassError : ParameterError {
  using ParameterError::ParameterError;
};

/// A ratio metric's denominator is zero (e.g. no positive targets).
struct DegenerateDenominatorError : ParameterError {
  using ParameterError::ParameterError;
};

/// Every box constraint collapsed to (numerically) zero width.
struct DegenerateBoxError : ParameterError {
  using ParameterError::ParameterError;
};

/// Problems with a run configuration file or flag value.
struct ConfigError : Error {
  using Error::Error;
};

/// Filesystem problems: missing inputs, unwritable outputs.
struct IoError : Error {
  using Error::Error;
};

}  // namespace trendcast
