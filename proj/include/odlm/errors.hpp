#pragma once

#include <stdexcept>
#include <string>

namespace odlm {

// Numerical failures. The CLI maps these to exit code 3.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NotPositiveDefinite : NumericError {
    using NumericError::NumericError;
};

struct ConvergenceFailure : NumericError {
    using NumericError::NumericError;
};

struct SingularTriangular : NumericError {
    using NumericError::NumericError;
};

struct SingularNormalEquations : NumericError {
    using NumericError::NumericError;
};

struct DivergenceDetected : NumericError {
    using NumericError::NumericError;
};

// Bad input data or files. The CLI maps these to exit code 2.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParseError : DataError {
    using DataError::DataError;
};

struct TooShortSequence : DataError {
    using DataError::DataError;
};

struct EmptyCalibration : DataError {
    using DataError::DataError;
};

struct InvalidItemId : DataError {
    using DataError::DataError;
};

struct IoError : DataError {
    using DataError::DataError;
};

struct DimensionMismatch : DataError {
    using DataError::DataError;
};

}  // namespace odlm
