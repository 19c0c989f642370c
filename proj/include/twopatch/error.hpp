#pragma once

#include <stdexcept>
#include <string>

namespace twopatch {

/// Bad input: parameters, sizes, configuration keys. Maps to CLI exit code 1.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Solver breakdown (NaN, step underflow, non-convergence, indefinite shift).
/// Maps to CLI exit code 2.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& what) {
    if (!cond) throw ValidationError(what);
}

}  // namespace twopatch
