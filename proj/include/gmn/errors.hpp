#pragma once

#include <stdexcept>
#include <string>

namespace gmn {

// Error hierarchy. The CLI maps each family to a stable exit code.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class CapacityError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConvergenceError : public NumericalError {
public:
    ConvergenceError(const std::string& what, double residual)
        : NumericalError(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace gmn
