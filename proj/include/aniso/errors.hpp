#pragma once

#include <stdexcept>
#include <string>

namespace aniso {

// Non-finite angle or out-of-domain argument.
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

// A user-supplied density returned a non-finite value.
struct EvaluationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Caller broke a documented precondition (sizes, signs, bounds).
struct ContractViolation : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Zero-length edge or otherwise unusable polygon.
struct DegenerateMeshError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Self-intersecting input where a simple curve is required.
struct UnsupportedGeometry : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// k0 bisection could not certify feasibility at the closed-form bound.
struct InconsistencyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Newton did not converge; carries the last residual max-norm.
struct StepFailure : std::runtime_error {
    StepFailure(const std::string& what, double last_residual, int iterations)
        : std::runtime_error(what), residual(last_residual), iters(iterations) {}
    double residual;
    int iters;
};

// 3 gamma(theta) - gamma(theta - pi) >= 0 fails somewhere.
struct StabilityViolation : std::domain_error {
    using std::domain_error::domain_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace aniso
