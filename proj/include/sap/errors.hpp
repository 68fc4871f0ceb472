#pragma once

#include <stdexcept>
#include <string>

namespace sap {

// Maps to CLI exit code 2.
struct config_error : std::runtime_error {
    explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

// Maps to CLI exit code 3: non-convergence, instability, contract violations.
struct numerical_error : std::runtime_error {
    explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

// Maps to CLI exit code 4: filesystem/allocation failures.
struct resource_error : std::runtime_error {
    explicit resource_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace sap
