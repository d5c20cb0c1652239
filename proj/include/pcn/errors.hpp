#ifndef PCN_ERRORS_HPP
#define PCN_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace pcn {

// Base class for all library errors. Subclasses exist so callers can map
// failure classes to exit codes without parsing messages.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape disagreement between operands. Message names both shapes.
struct DimensionError : Error {
    using Error::Error;
};

// Argument outside an operation's mathematical domain.
struct DomainError : Error {
    using Error::Error;
};

// Linear solve hit a pivot below tolerance. Carries the offending pivot.
struct SingularMatrixError : Error {
    double pivot_magnitude;
    SingularMatrixError(const std::string& msg, double pivot)
        : Error(msg), pivot_magnitude(pivot) {}
};

// Caller violated an operation's stated precondition (e.g. a nonlinear
// activation passed to the linear-equilibrium solver).
struct ContractError : Error {
    using Error::Error;
};

// Invalid or inconsistent experiment configuration.
struct ConfigError : Error {
    using Error::Error;
};

// Malformed or truncated input data (IDX files, model containers, CSV).
struct DataError : Error {
    using Error::Error;
};

// Relaxation or training blew past the divergence guard.
struct DivergenceError : Error {
    std::size_t step;
    DivergenceError(const std::string& msg, std::size_t at_step)
        : Error(msg), step(at_step) {}
};

// Any other numerical failure (NaN detection and the like).
struct NumericError : Error {
    using Error::Error;
};

}  // namespace pcn

#endif  // PCN_ERRORS_HPP
