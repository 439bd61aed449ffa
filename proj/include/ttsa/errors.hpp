#pragma once

#include <stdexcept>
#include <string>

namespace ttsa {

/// Base class for all library failures. Subclasses name the contract that broke.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Transition matrix is not row-stochastic or not irreducible.
struct ReducibleChain : Error {
    using Error::Error;
};

/// A linear system that should be uniquely solvable is numerically defective.
struct SingularSystem : Error {
    using Error::Error;
};

/// Input that must average to zero under the stationary law does not.
struct NonCenteredInput : Error {
    using Error::Error;
};

/// Vector or matrix sizes do not agree with the object they are used with.
struct DimensionMismatch : Error {
    using Error::Error;
};

/// An inner solver exceeded its iteration budget without meeting tolerance.
struct NoConvergence : Error {
    using Error::Error;
};

/// Fixed-point iteration observed expansion instead of contraction.
struct NotContracting : Error {
    using Error::Error;
};

/// An iterate left the finite range the driver guards (divergence).
struct NonFiniteIterate : Error {
    long step = -1;
    NonFiniteIterate(const std::string& what, long step_index)
        : Error(what), step(step_index) {}
};

/// A sampled or asserted property failed; the message carries the witness.
struct PropertyViolated : Error {
    using Error::Error;
};

/// A closed-form subproblem solve produced no valid solution (bad input).
struct SolverDiverged : Error {
    using Error::Error;
};

/// Rate fit requested on fewer points than the fit needs.
struct InsufficientPoints : Error {
    using Error::Error;
};

/// Rate fit requested on values that are not strictly positive.
struct NonPositiveValue : Error {
    using Error::Error;
};

/// A target state cannot be reached, so hitting-time weights do not exist.
struct Unreachable : Error {
    using Error::Error;
};

/// Configuration file or CLI arguments are malformed.
struct ConfigError : Error {
    using Error::Error;
};

}  // namespace ttsa
