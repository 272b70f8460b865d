#pragma once

#include <stdexcept>
#include <string>

namespace inls {

// Base of everything the library throws on purpose.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A precondition on parameters or inputs was violated.
class DomainError : public Error {
public:
    using Error::Error;
};

// Shooting bracket could not be found.
class NoConvergence : public Error {
public:
    using Error::Error;
};

// The grid cannot deliver the requested accuracy.
class ResolutionTooCoarse : public Error {
public:
    using Error::Error;
};

// Singular or unsolvable linear system inside a time step.
class SolveFailure : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, int line)
        : Error(what), line_(line) {}
    int line() const noexcept { return line_; }

private:
    int line_;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

} // namespace inls
