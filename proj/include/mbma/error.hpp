#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mbma {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed user input: dimension mismatch, unknown names, bad files.
class InputError : public Error {
public:
    using Error::Error;
};

// Invalid model parameters (non-SPD covariance, non-normalized shape, ...).
class ParameterError : public Error {
public:
    using Error::Error;
};

// Floating-point breakdown. Carries the offending observation when known.
class NumericError : public Error {
public:
    static constexpr std::size_t kNoRow = static_cast<std::size_t>(-1);

    explicit NumericError(const std::string& what, std::size_t row = kNoRow)
        : Error(row == kNoRow ? what : what + " (row " + std::to_string(row) + ")"), row_(row) {}

    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

// A component emptied out or a covariance stayed singular after jitter.
class DegenerateFitError : public Error {
public:
    using Error::Error;
};

// Initialization could not produce the requested number of groups.
class InitError : public Error {
public:
    using Error::Error;
};

// Every model in a sweep failed.
class SweepError : public Error {
public:
    using Error::Error;
};

}  // namespace mbma
