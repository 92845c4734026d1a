#pragma once

#include <stdexcept>
#include <string>

namespace dice {

// Error taxonomy mirrors the CLI exit codes: config/validation (1), IO (2), numeric (3).
struct ConfigError : std::invalid_argument {
    explicit ConfigError(const std::string& msg) : std::invalid_argument(msg) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace dice
