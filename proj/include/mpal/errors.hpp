#pragma once

#include <stdexcept>
#include <string>

namespace mpal {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A geometric precondition (cube placement, distance hypothesis, ...) does not hold.
class GeometryError : public Error {
public:
    using Error::Error;
};

/// Invalid argument or unsupported parameter combination.
class DomainError : public Error {
public:
    using Error::Error;
};

/// The requested energy lies on (or numerically on) the spectrum.
class ResonantEnergyError : public Error {
public:
    explicit ResonantEnergyError(double energy)
        : Error("resonant energy: E = " + std::to_string(energy) + " is an eigenvalue"),
          energy_(energy) {}

    double energy() const noexcept { return energy_; }

private:
    double energy_;
};

/// Malformed configuration file or command line override.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A checked numerical invariant failed (e.g. insufficient simulation volume).
class InvariantError : public Error {
public:
    using Error::Error;
};

} // namespace mpal
