#pragma once

#include <stdexcept>
#include <string>

namespace sparsekg {

// Symmetric factorization failed even after the documented ridge retry.
class SingularPrecisionError : public std::runtime_error {
public:
    explicit SingularPrecisionError(const std::string& msg) : std::runtime_error(msg) {}
};

// Iterative solver ran out of passes; carries the best certificate value reached
// so callers can decide whether the result is still usable.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& msg, double achieved_residual)
        : std::runtime_error(msg), achieved(achieved_residual) {}
    double achieved;
};

}  // namespace sparsekg
