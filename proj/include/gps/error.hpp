#pragma once

#include <stdexcept>
#include <string>

namespace gps {

// Bad input, configuration or discretization parameters. CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A computation ran but its result failed a required check. CLI exit code 3.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class GridError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

class ResolutionError : public ConfigError {
public:
    ResolutionError(const std::string& what, int required_n)
        : ConfigError(what), required_n_(required_n) {}
    int required_n() const { return required_n_; }

private:
    int required_n_;
};

// Symbol fails the ellipticity lower bound outside the excluded box.
class EllipticityError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

class EscapeError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class DeformationError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

} // namespace gps
