#pragma once

#include <stdexcept>
#include <string>

namespace specid {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad input: malformed specs, violated preconditions, out-of-range parameters.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A computation could not meet its accuracy contract (panel budget,
/// eigensolver failure, non-finite intermediate values).
class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace specid
