#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace kgan {

/// Bad argument: dimension mismatch, out-of-domain value, malformed spec.
struct invalid_input : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// A computation produced a non-finite value; the message names where.
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// The operation is not defined for this object (e.g. conjugate of a
/// non-convex loss).
struct unsupported_operation : std::logic_error {
    using std::logic_error::logic_error;
};

/// An object was used after the state it was derived from changed.
struct invalid_state : std::logic_error {
    using std::logic_error::logic_error;
};

/// A point violates a hard feasibility constraint.
struct infeasible_point : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct invalid_config : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Training left the finite range; carries the step at which it happened.
struct diverged_error : std::runtime_error {
    diverged_error(const std::string& what, std::int64_t at_iteration)
        : std::runtime_error(what), iteration(at_iteration) {}
    std::int64_t iteration;
};

/// An iterative solver hit its budget before reaching tolerance.
struct budget_exceeded : std::runtime_error {
    budget_exceeded(const std::string& what, double best_primal, double best_dual)
        : std::runtime_error(what), primal(best_primal), dual(best_dual) {}
    double primal;
    double dual;
};

}  // namespace kgan
