#pragma once

#include <stdexcept>
#include <string>

namespace sonic {

// Base class for all domain errors raised by the library. I/O problems use
// IoError so callers can map them to a distinct exit code.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class EmptyCluster : public Error {
 public:
  using Error::Error;
};

// A node was never observed; frequency-corrected estimators divide by p_i.
class ZeroFrequency : public Error {
 public:
  using Error::Error;
};

class InsufficientSamples : public Error {
 public:
  using Error::Error;
};

class NumericalFailure : public Error {
 public:
  using Error::Error;
};

class UnstableOperator : public Error {
 public:
  using Error::Error;
};

class InfeasibleSparsity : public Error {
 public:
  using Error::Error;
};

class DegenerateDiagonal : public Error {
 public:
  using Error::Error;
};

class TooManyClusters : public Error {
 public:
  using Error::Error;
};

class GuardTripped : public Error {
 public:
  using Error::Error;
};

class SingularGram : public Error {
 public:
  using Error::Error;
};

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace sonic
