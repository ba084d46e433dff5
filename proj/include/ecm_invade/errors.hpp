#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ecm_invade {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid user configuration (grid, parameters, config file contents).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Config file syntax error; carries the 1-based line number.
class ParseError : public ConfigError {
public:
    ParseError(std::size_t line, const std::string& what)
        : ConfigError("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Field sizes do not match the grid they are evaluated on.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A pointwise map was evaluated outside its domain (e.g. log of a non-positive value).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Time integration broke down: NaN/Inf or step-size underflow.
class InstabilityError : public Error {
public:
    using Error::Error;
};

/// A box constraint was violated beyond tolerance.
class StabilityError : public Error {
public:
    StabilityError(const std::string& what, std::size_t index, double time)
        : Error(what), index_(index), time_(time) {}
    std::size_t index() const noexcept { return index_; }
    double time() const noexcept { return time_; }

private:
    std::size_t index_;
    double time_;
};

/// Conjugate gradients did not reach the requested residual.
class LinearSolveError : public Error {
public:
    LinearSolveError(const std::string& what, double residual)
        : Error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// An iterative nonlinear solve hit its iteration cap.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double residual)
        : Error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

class FrontNotFoundError : public Error {
public:
    using Error::Error;
};

class InsufficientDataError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace ecm_invade
