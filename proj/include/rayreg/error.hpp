#pragma once

#include <stdexcept>
#include <string>

namespace rayreg {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the support of a distribution or link (y <= 0, mu <= 0, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A linear predictor mapped to a non-positive mean under the identity link.
class NonAdmissibleMeanError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Design matrix without full column rank, or violated shape invariants.
class RankError : public Error {
 public:
  using Error::Error;
};

/// Fisher information not positive definite at the evaluation point.
class SingularInformationError : public Error {
 public:
  using Error::Error;
};

/// Too few bootstrap replicates converged.
class BootstrapDegenerateError : public Error {
 public:
  using Error::Error;
};

/// Relative bias requested for a parameter whose true value is zero.
class UndefinedRelativeBiasError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file; the message names the offending row/column.
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace rayreg
