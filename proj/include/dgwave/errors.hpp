#pragma once

#include <stdexcept>
#include <string>

namespace dgwave {

/// LU elimination met a pivot below the singularity threshold.
struct SingularMatrix : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Matrix handed to a symmetric-positive-definite routine is not SPD.
struct NotSPD : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Two spatial functions (or a function and an operator) live on different spaces.
struct SpaceMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Error measurement requested on a problem without an attached exact solution.
struct MissingExactSolution : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace dgwave
