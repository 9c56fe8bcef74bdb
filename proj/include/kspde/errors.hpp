#ifndef KSPDE_ERRORS_HPP
#define KSPDE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace kspde {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidExponent : public Error {
public:
    using Error::Error;
};

class InvalidParameter : public Error {
public:
    using Error::Error;
};

class ConfigurationError : public Error {
public:
    using Error::Error;
};

class GridMismatch : public Error {
public:
    using Error::Error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class NotPsd : public Error {
public:
    using Error::Error;
};

class RangeError : public Error {
public:
    using Error::Error;
};

/// Non-finite or exploding state. Carries the step index at which it was detected.
class BlowUp : public Error {
public:
    BlowUp(const std::string& what, long step) : Error(what), step_(step) {}
    long step() const noexcept { return step_; }

private:
    long step_;
};

/// Linear solve failure in the semi-implicit scheme.
class SolverError : public Error {
public:
    SolverError(const std::string& what, double residual) : Error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

}  // namespace kspde

#endif  // KSPDE_ERRORS_HPP
