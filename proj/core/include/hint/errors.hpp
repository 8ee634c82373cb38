#pragma once

#include <stdexcept>
#include <string>

namespace hint {

// Error taxonomy. The CLI maps these onto exit codes:
//   ConfigError -> 2, DataError (and LengthError) -> 3, DivergenceError -> 4.
// ShapeError / ContractError signal programming mistakes and are not expected
// to surface through the CLI in normal operation.

struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ContractError : std::logic_error {
    using std::logic_error::logic_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct LengthError : DataError {
    using DataError::DataError;
};

struct DivergenceError : std::runtime_error {
    int step;
    DivergenceError(int step_, const std::string& msg)
        : std::runtime_error(msg), step(step_) {}
};

} // namespace hint
