#pragma once

#include <stdexcept>
#include <string>

namespace novelgrid {

// Contract violations use std::invalid_argument; these cover the rest of
// the distinct CLI exit classes.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

struct CalibrationError : std::runtime_error {
    explicit CalibrationError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace novelgrid
