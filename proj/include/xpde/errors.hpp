#ifndef XPDE_ERRORS_HPP
#define XPDE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace xpde {

// Raised when an evaluation produces inf/NaN (operator domain violation,
// overflow, or a |denominator| below the division guard).
struct NonFiniteError : std::runtime_error {
    explicit NonFiniteError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when an operator has no derivative rule.
struct UnsupportedOperatorError : std::runtime_error {
    explicit UnsupportedOperatorError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when a quotient functional sees an L2 mass below 1e-12.
struct DegenerateDenominatorError : std::runtime_error {
    explicit DegenerateDenominatorError(const std::string& what) : std::runtime_error(what) {}
};

// Raised for malformed configs, templates or expression text.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace xpde

#endif
