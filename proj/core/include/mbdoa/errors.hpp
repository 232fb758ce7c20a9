#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mbdoa {

/// Argument outside the mathematical domain of an operation (bad rho, K >= M, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Cholesky pivot was not strictly positive.
class NotPositiveDefinite : public std::runtime_error {
public:
    NotPositiveDefinite(std::size_t pivot, double value)
        : std::runtime_error("matrix is not positive definite: pivot " + std::to_string(pivot) +
                             " has value " + std::to_string(value)),
          pivot_(pivot), value_(value) {}

    std::size_t pivot() const noexcept { return pivot_; }
    double value() const noexcept { return value_; }

private:
    std::size_t pivot_;
    double value_;
};

/// Eigenvalue below the PSD tolerance.
class NotPositiveSemidefinite : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Iterative routine failed to converge, or a loss became non-finite.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed configuration, model or snapshot file, or mismatched shapes.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// API used out of contract (e.g. backward pass with a stale forward cache).
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace mbdoa
