#pragma once

#include <stdexcept>
#include <string>

namespace mixot {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed arguments: dimension mismatch, non-symmetric matrix, weights off the simplex.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Schema violation while loading a mixture document. `field` is a JSON path.
class SchemaError : public InvalidInput {
 public:
  SchemaError(std::string field, const std::string& message, const std::string& source = "")
      : InvalidInput((source.empty() ? "" : source + ": ") + (field.empty() ? "" : field + ": ") +
                     message),
        field_(std::move(field)),
        message_(message) {}
  const std::string& field() const noexcept { return field_; }
  /// The message without field path or source prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  std::string field_;
  std::string message_;
};

/// Two atoms (or mixtures) come from different generator families or groups.
class FamilyMismatch : public Error {
 public:
  using Error::Error;
};

class SingularSource : public Error {
 public:
  using Error::Error;
};

class UnsupportedProfile : public Error {
 public:
  using Error::Error;
};

class UnsupportedDimension : public Error {
 public:
  using Error::Error;
};

/// Problem size exceeds a dense-solver guard.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// An iteration hit its cap. `residual` is the last measured residual.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& message, double residual, int iterations)
      : Error(message + " (residual " + std::to_string(residual) + " after " +
              std::to_string(iterations) + " iterations)"),
        residual_(residual),
        iterations_(iterations) {}
  double residual() const noexcept { return residual_; }
  int iterations() const noexcept { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

class EmptySupport : public Error {
 public:
  using Error::Error;
};

class InvalidGrid : public Error {
 public:
  using Error::Error;
};

/// Operation not available for this group (e.g. orbit enumeration of SO(2)).
class UnsupportedGroup : public Error {
 public:
  using Error::Error;
};

/// A Slater determinant built from linearly dependent orbitals.
class DegenerateDeterminant : public Error {
 public:
  using Error::Error;
};

}  // namespace mixot
