#pragma once
#include <stdexcept>
#include <string>

namespace qdi {

// Error taxonomy mirrors the CLI exit codes: config 2, numeric 3, io 4.
struct config_error : std::runtime_error {
    explicit config_error(const std::string& m) : std::runtime_error(m) {}
};
struct numeric_error : std::runtime_error {
    explicit numeric_error(const std::string& m) : std::runtime_error(m) {}
};
struct io_error : std::runtime_error {
    explicit io_error(const std::string& m) : std::runtime_error(m) {}
};

}  // namespace qdi
