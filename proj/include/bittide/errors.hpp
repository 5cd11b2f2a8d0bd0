#pragma once

#include <stdexcept>
#include <string>

namespace bittide {

/// Malformed input: topology, parameters, configuration.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Spectral preconditions not met (reducible A, singular stable block).
class SpectralError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Explicit integrator step exceeds the stability bound.
class StabilityError : public std::invalid_argument {
public:
    StabilityError(const std::string& what, double bound)
        : std::invalid_argument(what), bound_(bound) {}
    double bound() const noexcept { return bound_; }

private:
    double bound_;
};

/// Controller misuse, e.g. reframing twice.
class ControllerError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace bittide
