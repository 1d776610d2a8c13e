#pragma once

#include <stdexcept>
#include <string>

namespace v2v3d {

// Error taxonomy used across the library. The CLI maps these to exit codes:
// ConfigError/UsageError -> 1, file and shape errors -> 2, NumericError -> 3.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed file: wrong magic, unreadable header.
struct FormatError : Error {
    using Error::Error;
};

// Payload shorter or longer than the header promises.
struct LengthError : FormatError {
    using FormatError::FormatError;
};

// Payload readable but invalid: NaN values, degenerate slices.
struct DataError : Error {
    using Error::Error;
};

// Operands disagree on dimensions.
struct ShapeError : Error {
    using Error::Error;
};

// PSF geometry would place a kernel entirely outside its support.
struct GeometryError : Error {
    using Error::Error;
};

// Bad configuration: unknown key, unparsable or out-of-range value.
struct ConfigError : Error {
    using Error::Error;
};

// Wrong command-line invocation.
struct UsageError : Error {
    using Error::Error;
};

// NaN or divergence detected during an optimization run.
struct NumericError : Error {
    using Error::Error;
};

} // namespace v2v3d
