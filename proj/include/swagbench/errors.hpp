#pragma once

#include <stdexcept>
#include <string>

namespace swagbench {

// Exit-code mapping lives in the CLI; the hierarchy here only carries intent.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape/length disagreements between caller and callee.
struct DimensionError : Error {
    using Error::Error;
};

// Bad payloads: non-finite numbers, labels out of range, malformed input data.
struct DataError : Error {
    using Error::Error;
};

// Invalid configuration detected at construction time.
struct ConfigError : Error {
    using Error::Error;
};

// Checkpoint / file-format violations (bad magic, version, truncation).
struct FormatError : Error {
    using Error::Error;
};

struct CorruptionError : FormatError {
    using FormatError::FormatError;
};

// Backend I/O failures; carries the OS cause in the message when available.
struct StorageError : Error {
    using Error::Error;
};

struct RangeError : Error {
    using Error::Error;
};

// Training produced non-finite values.
struct DivergenceError : Error {
    using Error::Error;
};

}  // namespace swagbench
