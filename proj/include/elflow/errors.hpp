#pragma once

#include <stdexcept>
#include <string>

namespace elflow {

// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Input outside an operation's mathematical domain.
class DomainError : public Error {
public:
    using Error::Error;
};

class UnsupportedOrderError : public Error {
public:
    using Error::Error;
};

// Dense solve refused because the system matrix is numerically singular.
class SingularSystemError : public Error {
public:
    SingularSystemError(const std::string& what, double cond_estimate)
        : Error(what), cond_estimate_(cond_estimate) {}

    double cond_estimate() const noexcept { return cond_estimate_; }

private:
    double cond_estimate_;
};

// Configuration parse or validation failure.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace elflow
