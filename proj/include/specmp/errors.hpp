#pragma once

#include <stdexcept>
#include <string>

namespace specmp {

/// Invalid model, configuration or precondition violation.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical routine failed to deliver a result (non-convergence,
/// eigensolver failure, ...).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace specmp
