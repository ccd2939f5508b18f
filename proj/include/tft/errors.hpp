#pragma once

#include <stdexcept>
#include <string>

namespace tft {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid configuration, shape mismatch, or API misuse. CLI exit code 2.
struct ConfigError : Error {
    using Error::Error;
};

/// Non-finite values, divergence, or other numeric breakdown. CLI exit code 3.
struct NumericFault : Error {
    using Error::Error;
};

/// Filesystem and serialization failures. CLI exit code 4.
struct IoError : Error {
    using Error::Error;
};

/// Checkpoint parsing failures, split by kind so callers can react.
struct CheckpointError : IoError {
    enum class Kind { BadMagic, Truncated, ShapeMismatch };
    Kind kind;
    CheckpointError(Kind k, const std::string& msg) : IoError(msg), kind(k) {}
};

}  // namespace tft
