#pragma once

#include <stdexcept>
#include <string>

namespace drip {

struct DripError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParseError : DripError {
    using DripError::DripError;
};

struct DataError : DripError {
    using DripError::DripError;
};

struct ConfigError : DripError {
    using DripError::DripError;
};

struct NumericalFault : DripError {
    using DripError::DripError;
};

struct IoError : DripError {
    using DripError::DripError;
};

}  // namespace drip
