#pragma once

#include <stdexcept>
#include <string>

namespace apt {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad configuration or mismatched dimensions.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Non-finite input data handed to an estimator.
class InputError : public Error {
 public:
  using Error::Error;
};

/// A non-finite value appeared during a computation.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A product/quotient of Gaussians produced a precision matrix that is not
/// positive definite. `first`/`second` identify the offending component pair.
class PrecisionNotPD : public Error {
 public:
  PrecisionNotPD(const std::string& what, int first = -1, int second = -1)
      : Error(what), first_(first), second_(second) {}
  int first() const { return first_; }
  int second() const { return second_; }

 private:
  int first_;
  int second_;
};

/// Post-hoc proposal correction produced an invalid covariance.
class NonPositiveDefinite : public Error {
 public:
  NonPositiveDefinite(const std::string& what, int component = -1)
      : Error(what), component_(component) {}
  int component() const { return component_; }

 private:
  int component_;
};

/// An atom lies outside the prior support.
class InvalidAtom : public Error {
 public:
  using Error::Error;
};

/// Simulator could not produce output for the given parameters.
class SimulationError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

/// Grid too coarse for a reference posterior.
class ResolutionError : public Error {
 public:
  using Error::Error;
};

class BandwidthError : public Error {
 public:
  using Error::Error;
};

/// File could not be read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace apt
