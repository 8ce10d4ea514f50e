#pragma once

#include <stdexcept>
#include <string>

namespace veridip {

/// Base class for every error the library throws.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Parameter, shape, label or configuration out of its valid range.
struct InvalidArgument : Error {
  using Error::Error;
};

/// Dataset construction or CSV ingestion failure.
struct DataError : Error {
  using Error::Error;
};

/// Non-finite loss encountered while training; message names the epoch.
struct DivergenceError : Error {
  using Error::Error;
};

// Model-file parsing failures, one type per way a file can be rejected.
struct ParseError : Error {
  using Error::Error;
};
struct BadMagicError : ParseError {
  using ParseError::ParseError;
};
struct VersionError : ParseError {
  using ParseError::ParseError;
};
struct TruncatedError : ParseError {
  using ParseError::ParseError;
};
struct ShapeError : ParseError {
  using ParseError::ParseError;
};
struct ChecksumError : ParseError {
  using ParseError::ParseError;
};

// Prediction-oracle failures.
struct OracleError : Error {
  using Error::Error;
};
struct BudgetExceededError : OracleError {
  using OracleError::OracleError;
};
struct ProtocolError : OracleError {
  using OracleError::OracleError;
};
struct UnreachableError : OracleError {
  using OracleError::OracleError;
};

/// Fewer than two in/out observations for a per-sample Gaussian fit.
struct InsufficientShadowsError : Error {
  using Error::Error;
};

/// A sample was covered by fewer than two in- or out-shadow models.
struct CoverageError : Error {
  using Error::Error;
};

}  // namespace veridip
