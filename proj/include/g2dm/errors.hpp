#pragma once

#include <stdexcept>
#include <string>

namespace g2dm {

// Shape or size disagreement between tensors.
struct DimensionError : std::runtime_error {
    explicit DimensionError(const std::string& what) : std::runtime_error(what) {}
};

// NaN/Inf produced inside the computation engine.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed external input (CSV, config files).
struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace g2dm
