#pragma once

#include <stdexcept>
#include <string>

namespace csim {

// Error taxonomy. Exceptions are grouped into three families that map onto
// the process exit codes (and the C API status codes): configuration (2),
// data ingestion (3) and numeric failure (4).

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// --- numeric failures ---

struct DomainError : NumericError {
  using NumericError::NumericError;
};

struct SupportError : NumericError {
  using NumericError::NumericError;
};

struct DimensionError : NumericError {
  using NumericError::NumericError;
};

struct SeparationError : NumericError {
  using NumericError::NumericError;
};

struct SingularDesignError : NumericError {
  using NumericError::NumericError;
};

struct DegenerateVarianceError : NumericError {
  using NumericError::NumericError;
};

struct EmptyError : NumericError {
  using NumericError::NumericError;
};

struct SingularInformationError : NumericError {
  using NumericError::NumericError;
};

struct SingularError : NumericError {
  using NumericError::NumericError;
};

struct NotPSDError : NumericError {
  using NumericError::NumericError;
};

struct SingularConditionError : NumericError {
  using NumericError::NumericError;
};

struct UnsupportedSchemeError : NumericError {
  using NumericError::NumericError;
};

struct DegenerateError : NumericError {
  using NumericError::NumericError;
};

// --- data ingestion failures ---

struct ParseError : DataError {
  using DataError::DataError;
};

struct LabelError : DataError {
  using DataError::DataError;
};

struct IoError : DataError {
  using DataError::DataError;
};

}  // namespace csim
