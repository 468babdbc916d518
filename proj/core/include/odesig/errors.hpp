#pragma once

#include <stdexcept>
#include <string>

namespace odesig {

// Shape disagreement between operands. Messages name both shapes.
struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid configuration value (bad kernel size, nonpositive threshold, ...).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Violated call contract (non-scalar loss, empty batch, negative adjacency, ...).
struct ContractError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-monotone or empty time grid.
struct GridError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Numerical blow-up during integration or training.
struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A callback produced a non-finite value where a finite one is required.
struct EvaluationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Filesystem-level failure.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed file content. Messages carry the offending line number.
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace odesig
