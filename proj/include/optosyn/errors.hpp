#pragma once

#include <stdexcept>
#include <string>

namespace optosyn {

/* Two error families, mapped to CLI exit codes: bad inputs or
   configuration exit 1, runtime numerical failures exit 2. */
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/* malformed document: unknown/missing field, wrong type */
struct SchemaError : ValidationError {
  using ValidationError::ValidationError;
};

/* pulse or query names a channel the protocol does not declare */
struct UnknownChannel : ValidationError {
  using ValidationError::ValidationError;
};

/* fanout target id not present in the device registry */
struct UnknownDevice : ValidationError {
  using ValidationError::ValidationError;
};

/* metric window selects no samples */
struct EmptyWindow : ValidationError {
  using ValidationError::ValidationError;
};

/* calibration bound with lo > hi, or initial value outside its bound */
struct InfeasibleBounds : ValidationError {
  using ValidationError::ValidationError;
};

/* integration step violates the step-size contract */
struct StepTooLarge : ValidationError {
  using ValidationError::ValidationError;
};

/* bisection bracket endpoints have equal sign */
struct NoCrossing : NumericalError {
  using NumericalError::NumericalError;
};

/* state or current left the finite range during integration */
struct NonFinite : NumericalError {
  using NumericalError::NumericalError;
};

/* decay fit residual exceeded the configured bound */
struct FitDiverged : NumericalError {
  using NumericalError::NumericalError;
};

/* ratio denominator below the noise floor */
struct DivisionByNearZero : NumericalError {
  using NumericalError::NumericalError;
};

}  // namespace optosyn
