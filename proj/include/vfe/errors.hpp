#pragma once

#include <stdexcept>
#include <string>

namespace vfe {

/// Input outside the mathematical domain of an operation (M < 3, q = 0, b >= 1, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Inconsistent run configuration (grid not divisible by M, unstable time step, ...).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Bad argument to an analysis routine (empty series, non-integer period coverage, ...).
class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A documented precondition of the call does not hold for the given data.
class PreconditionError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Numerical failure detected while computing (NaN, degenerate geometry, ...).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DegenerateCornerError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class BlowUpError : public NumericalError {
public:
    BlowUpError(std::size_t step, const std::string& what)
        : NumericalError("blow-up at step " + std::to_string(step) + ": " + what), step_(step) {}
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

class ConsistencyError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class ResolutionError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Tail of the self-similar profile still varies too much to read asymptotes.
class InsufficientDomainError : public NumericalError {
public:
    InsufficientDomainError(double required_extent, const std::string& what)
        : NumericalError(what), required_extent_(required_extent) {}
    double required_extent() const noexcept { return required_extent_; }

private:
    double required_extent_;
};

class ProjectionPoleError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class DegenerateFitError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// File could not be read or written; the message carries the path.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace vfe
