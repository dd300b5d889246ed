#pragma once

#include <stdexcept>
#include <string>

namespace portlab {

/// Base class for all portlab errors. Subclasses map onto CLI exit codes.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeError : Error {
    using Error::Error;
};
struct NumericError : Error {
    using Error::Error;
};
struct ArgumentError : Error {
    using Error::Error;
};
struct ConstraintError : Error {
    using Error::Error;
};
struct ParseError : Error {
    using Error::Error;
};
struct DataError : Error {
    using Error::Error;
};
struct FetchError : Error {
    using Error::Error;
};
struct TrainingError : Error {
    using Error::Error;
};
struct ConfigError : Error {
    using Error::Error;
};
struct StrategyError : Error {
    using Error::Error;
};

}  // namespace portlab
