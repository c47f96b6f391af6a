#pragma once

#include <stdexcept>
#include <string>

namespace backstep {

/// Invalid system data (ordering, dimensions, diagonal coupling, ...).
class ValidationError : public std::runtime_error {
public:
    ValidationError(std::string rule, const std::string& message)
        : std::runtime_error("[" + rule + "] " + message), rule_(std::move(rule)) {}

    [[nodiscard]] const std::string& rule() const noexcept { return rule_; }

private:
    std::string rule_;
};

/// A point or index outside the domain an operation is defined on.
class DomainError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

/// Bad numerical parameter (tolerances, CFL, epsilon, ...).
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Matrix/vector shapes that do not agree.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Configuration the library deliberately does not handle.
class UnsupportedError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace backstep
