#pragma once

#include <stdexcept>
#include <string>

namespace spiked {

/// Base of all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid input: bad shapes, out-of-range parameters, malformed files.
/// The CLI maps these to exit code 2.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// An argument outside the mathematical domain of an operation
/// (e.g. a Stieltjes point inside the bulk, a ratio d > 1).
class DomainError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Quadrature or iteration failure. The CLI maps these to exit code 3.
class NumericalError : public Error {
public:
    using Error::Error;
};

}  // namespace spiked
