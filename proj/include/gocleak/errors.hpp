#pragma once

#include <stdexcept>
#include <string>

namespace gocleak {

// Argument outside the mathematical domain of an operation (bad state index,
// interval out of {1..t_max}, malformed matrix, ...).
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// An iterative routine hit its iteration cap before reaching tolerance.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// An observation sequence that has zero probability under the assumed
// schedule (for instance an interval that no state is scheduled with).
class InconsistencyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid experiment configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace gocleak
