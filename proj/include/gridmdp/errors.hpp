#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gridmdp {

/// Vector lengths or indices inconsistent with the grid topology.
class StructuralError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Configuration or file content that fails validation.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Newton iteration of the implicit step failed to converge.
class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& what, double residual_norm)
        : std::runtime_error(what), residual_norm_(residual_norm) {}
    double residual_norm() const noexcept { return residual_norm_; }

private:
    double residual_norm_;
};

/// Day-ahead dispatch cannot satisfy generator capacity or ramp limits.
class InfeasibleScheduleError : public std::runtime_error {
public:
    InfeasibleScheduleError(const std::string& what, std::size_t step)
        : std::runtime_error(what), step_(step) {}
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

/// Training data without spread (every error value identical).
class DegenerateDataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// No discrete action survives elimination at a state that must act.
class ExhaustionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Caller violated the receding-horizon protocol (unknown action or wind successor).
class ProtocolError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace gridmdp
