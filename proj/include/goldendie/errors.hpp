#pragma once

#include <stdexcept>
#include <string>

namespace goldendie {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// File missing, unreadable, or malformed on disk.
struct IoError : Error {
    using Error::Error;
};

/// Rasters that must share a shape do not.
struct DimensionError : Error {
    using Error::Error;
};

/// A precondition on an operation's arguments was violated.
struct ContractError : Error {
    using Error::Error;
};

/// Invalid configuration (bad key, bad value, unknown section).
struct ConfigError : Error {
    using Error::Error;
};

} // namespace goldendie
