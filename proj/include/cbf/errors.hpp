#pragma once

#include <stdexcept>
#include <string>

namespace cbf {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid input to an operation (out-of-range wavenumber, bad sizes, ...).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Two fields or trajectories that must share a grid / time axis do not.
class GridMismatch : public Error {
public:
    using Error::Error;
};

/// A fixed-point solve exceeded its iteration budget or diverged.
class NonConvergence : public Error {
public:
    NonConvergence(const std::string& what, int iterations, double residual, int step = -1)
        : Error(what), iterations_(iterations), residual_(residual), step_(step) {}

    int iterations() const noexcept { return iterations_; }
    double residual() const noexcept { return residual_; }
    /// Time step index at which the failure happened, -1 when unknown.
    int step() const noexcept { return step_; }

private:
    int iterations_;
    double residual_;
    int step_;
};

/// A parameter combination violates the structural hypothesis 2*beta*mu > 1/kappa.
class HypothesisViolated : public Error {
public:
    using Error::Error;
};

/// Armijo backtracking exhausted its budget without sufficient decrease.
class LineSearchFailure : public Error {
public:
    using Error::Error;
};

/// Configuration file is missing, malformed, or fails validation.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace cbf
