#pragma once

#include <stdexcept>
#include <string>

namespace qmda {

// Invalid arguments or configuration. CLI maps this to exit code 2.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A numerical procedure failed on otherwise valid inputs. CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IntegrationDivergedError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// Trajectory sampling produced coincident states (rational resonance).
class DuplicateSampleError : public ParameterError {
 public:
  using ParameterError::ParameterError;
};

class InsufficientDataError : public ParameterError {
 public:
  using ParameterError::ParameterError;
};

class DegenerateBandwidthError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NormalizationFailedError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// Kernel matrix is reducible (disconnected graph) or the leading
// eigenvalue is not simple.
class ErgodicityError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class EigensolveError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DegeneratePartitionError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class ForecastDegenerateError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class ZeroProbabilityError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class InternalConsistencyError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class BundleFormatError : public ParameterError {
 public:
  using ParameterError::ParameterError;
};

}  // namespace qmda
