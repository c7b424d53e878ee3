#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace linbreg {

/// Shapes that do not fit together (kernel larger than image, block sizes, ...).
class DimensionError : public std::invalid_argument {
public:
    explicit DimensionError(const std::string& what) : std::invalid_argument(what) {}
};

/// Invalid scalar arguments: negative weights, non-finite input, bad ranges.
class ArgumentError : public std::invalid_argument {
public:
    explicit ArgumentError(const std::string& what) : std::invalid_argument(what) {}
};

/// Non-finite values produced during an evaluation, or a numerical kernel
/// (SVD, ...) that failed to converge.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Requested quantity is not available for this function (e.g. a conjugate
/// with no closed form).
class UnsupportedOperation : public std::logic_error {
public:
    explicit UnsupportedOperation(const std::string& what) : std::logic_error(what) {}
};

/// Input outside the domain of a loss (e.g. log of a non-positive shifted value).
class DomainError : public std::domain_error {
public:
    explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

/// Backtracking shrank the stepsize below its floor without finding a decrease.
class StagnationError : public std::runtime_error {
public:
    StagnationError(const std::string& what, double tau)
        : std::runtime_error(what), tau_(tau) {}
    double tau() const noexcept { return tau_; }

private:
    double tau_;
};

/// Experiment configuration problems; carries the offending line when known.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what, std::size_t line = 0)
        : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what),
          line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

} // namespace linbreg
