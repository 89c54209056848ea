#pragma once

#include <stdexcept>
#include <string>

namespace lrk {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Caller broke a precondition (dimension mismatch, bad argument).
class ContractError : public Error {
public:
    using Error::Error;
};

/// Non-finite values encountered.
class NumericError : public Error {
public:
    using Error::Error;
};

/// A dense guard (entry count, matrix order) would be exceeded.
class ResourceError : public Error {
public:
    using Error::Error;
};

/// A factorization failed; the message names the offending matrix.
class FactorizationError : public Error {
public:
    using Error::Error;
};

/// Sylvester operator is singular: spectra of A and -B overlap.
class SylvesterSingularError : public FactorizationError {
public:
    using FactorizationError::FactorizationError;
};

/// Operator handed to CG is not symmetric positive definite.
class SpdViolation : public Error {
public:
    using Error::Error;
};

/// Generator parameters out of range (e.g. diffusion positivity).
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Malformed input file.
class ParseError : public Error {
public:
    ParseError(const std::string& file, std::size_t line, const std::string& what)
        : Error(file + ":" + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Files parse individually but are inconsistent with each other.
class ValidationError : public Error {
public:
    using Error::Error;
};

}  // namespace lrk
