#pragma once

#include <stdexcept>
#include <string>

namespace amdmil {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Incompatible matrix dimensions.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration or argument value.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Non-finite values, divergence, or other numerical breakdown.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Malformed binary or JSON file. The message carries the byte offset when known.
class FormatError : public Error {
public:
    using Error::Error;
};

}  // namespace amdmil
