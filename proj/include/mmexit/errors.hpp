#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace mmexit {

/// Root of the library's exception hierarchy.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A model or scenario violates one of its invariants.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A caller-supplied argument is outside the operation's preconditions.
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// Singular systems, overflow, non-finite intermediate results.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Raised when a linear solve meets a (near-)singular matrix.
class SingularMatrixError : public NumericalError {
public:
    SingularMatrixError(const std::string& what, double condition_estimate);
    double condition_estimate() const noexcept { return condition_; }

private:
    double condition_;
};

/// An iterative scheme (fixed point, extrapolation, inversion) missed its tolerance.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double residual,
                     std::vector<double> history = {});
    double residual() const noexcept { return residual_; }
    const std::vector<double>& history() const noexcept { return history_; }

private:
    double residual_;
    std::vector<double> history_;
};

} // namespace mmexit
