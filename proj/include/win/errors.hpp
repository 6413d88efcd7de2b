#pragma once

// Error categories that map onto the CLI exit codes: config errors exit 1,
// I/O errors exit 2, numerical failures (NaN loss) exit 3. Contract
// violations inside the numeric code throw std::invalid_argument.

#include <stdexcept>

namespace win {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace win
