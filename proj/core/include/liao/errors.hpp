#pragma once

#include <stdexcept>
#include <string>

namespace liao {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input that fails structural validation (bad dimensions, malformed
/// scenario files, out-of-range indices). CLI maps this to exit code 2.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A field component evaluated to a non-finite value.
class EvaluationError : public Error {
public:
    EvaluationError(const std::string& msg, int component)
        : Error(msg), component_(component) {}
    int component() const { return component_; }

private:
    int component_ = -1;
};

/// Trajectory left the configured state bound before the requested time.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& msg, double last_valid_time)
        : Error(msg), last_valid_time_(last_valid_time) {}
    double last_valid_time() const { return last_valid_time_; }

private:
    double last_valid_time_ = 0.0;
};

/// The field vanishes where a transversal construction needs it.
class SingularityError : public Error {
public:
    using Error::Error;
};

/// Frame transport lost rank within a step.
class DegenerateTransportError : public Error {
public:
    using Error::Error;
};

/// Two internally-redundant computations disagree beyond tolerance.
class InternalConsistencyError : public Error {
public:
    using Error::Error;
};

/// Chart evaluation outside the valid tube, or a degenerate chart Jacobian.
class ChartError : public Error {
public:
    using Error::Error;
};

/// The lifted longitudinal speed left the [1/2, 2] window: the
/// perturbation is too far from the base field for the standard system.
class NotInNeighborhoodError : public Error {
public:
    using Error::Error;
};

/// A required precondition (certificate, smallness inequality) failed.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// Picard iteration failed to contract.
class NonContractionError : public Error {
public:
    NonContractionError(const std::string& msg, double ratio)
        : Error(msg), ratio_(ratio) {}
    double empirical_ratio() const { return ratio_; }

private:
    double ratio_ = 0.0;
};

/// An exponent or state grew beyond what doubles can represent safely.
class OverflowError : public Error {
public:
    using Error::Error;
};

/// The certification window is too short for the requested averages.
class InsufficientWindowError : public Error {
public:
    using Error::Error;
};

/// A trajectory fed to the Delta map left the reliable window.
class UnreliableDeltaError : public Error {
public:
    using Error::Error;
};

/// Filesystem failure while emitting reports.
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace liao
