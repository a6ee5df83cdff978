#pragma once

#include <stdexcept>
#include <string>

namespace ensdiv {

// Base of every error raised by the library. kind() is a stable,
// machine-readable tag used by the CLI error line.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual const char* kind() const noexcept { return "error"; }
};

// Invalid arguments or configuration, detected before any computation.
class ConfigError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "config"; }
};

// Constraint system has no solution (duplicate l_i, too few ensemble members).
class InfeasibleError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "infeasible"; }
};

// Least-squares design matrix without full column rank.
class RankDeficientError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "rank_deficient"; }
};

class ConvergenceError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "convergence"; }
};

// Malformed input file; the message carries the offending line number.
class ParseError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "parse"; }
};

class IoError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "io"; }
};

} // namespace ensdiv
