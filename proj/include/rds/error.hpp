#pragma once

#include <stdexcept>
#include <string>

namespace rds {

// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid input data, configuration, or violated precondition.
class ValidationError : public Error {
public:
    using Error::Error;
};

// A numeric computation produced a non-finite value.
class DivergenceError : public Error {
public:
    using Error::Error;
};

// A split with an empty train or test side.
class DegenerateSplitError : public Error {
public:
    using Error::Error;
};

// A training run gave up (too many failed episodes).
class RunAborted : public Error {
public:
    using Error::Error;
};

}  // namespace rds
