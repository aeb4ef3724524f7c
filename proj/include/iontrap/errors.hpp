#pragma once

#include <stdexcept>
#include <string>

namespace iontrap {

// Base for every error raised by the library. The CLI maps the two families
// below onto exit codes 2 (input/config) and 3 (numerical).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InputError : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

class ParseError : public InputError {
public:
    ParseError(const std::string& what, int line)
        : InputError("line " + std::to_string(line) + ": " + what), line_(line) {}
    int line() const noexcept { return line_; }

private:
    int line_;
};

class ValidationError : public InputError {
public:
    using InputError::InputError;
};

// Unknown electrode names, malformed targets, missing options.
class ConfigError : public InputError {
public:
    using InputError::InputError;
};

class InsufficientDataError : public InputError {
public:
    using InputError::InputError;
};

// Evaluation on (or within the guard distance of) a conductor or facet.
class BoundaryEvaluationError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class PreconditionError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class ConvergenceError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class NotTrappingError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class InfeasibleError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class DegenerateFitError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

}  // namespace iontrap
