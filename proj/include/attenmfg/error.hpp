#pragma once

#include <stdexcept>
#include <string>

namespace attenmfg {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input document. `field()` names the offending key path.
class ParseError : public Error {
public:
    ParseError(std::string field, const std::string& what)
        : Error("parse error at '" + field + "': " + what), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

// Well-formed data that breaks a domain invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

class InvalidParameters : public Error {
public:
    using Error::Error;
};

// M > T*J or a schedule that breaks the maintenance constraints.
class InfeasibleError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class BudgetExceeded : public Error {
public:
    using Error::Error;
};

class TimeoutError : public Error {
public:
    using Error::Error;
};

}  // namespace attenmfg
