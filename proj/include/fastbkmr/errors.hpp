#pragma once

#include <stdexcept>
#include <string>

namespace fastbkmr {

// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid argument or parameter value (bad shapes, out-of-range
// hyperparameters, SubsetTooSmall, grids outside the data range, ...).
struct DomainError : Error {
    using Error::Error;
};

// Problems with input data: missing columns, unusable rows, degenerate
// exposure columns, mismatched chain configurations.
struct DataError : Error {
    using Error::Error;
};

// Numerical failures: factorization breakdown, rank deficiency,
// non-finite intermediate quantities, transport instances too large.
struct NumericalError : Error {
    using Error::Error;
};

}  // namespace fastbkmr
