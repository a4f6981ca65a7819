#pragma once

#include <stdexcept>
#include <string>

namespace stbln {

// Error taxonomy used by the CLI to pick exit codes:
// config_error -> 2, data_error -> 3, numeric_error -> 4.
// Contract violations inside the library (bad shapes, out-of-range
// indices) throw std::invalid_argument.

class config_error : public std::runtime_error {
public:
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

class data_error : public std::runtime_error {
public:
    explicit data_error(const std::string& msg) : std::runtime_error(msg) {}
};

class numeric_error : public std::runtime_error {
public:
    explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace stbln
