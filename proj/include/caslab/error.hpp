#pragma once

#include <stdexcept>
#include <string>

namespace caslab {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Grid mismatch, bad sizes, invalid arguments.
class DomainError : public Error {
public:
    using Error::Error;
};

class NonFiniteError : public Error {
public:
    NonFiniteError(const std::string& what, int j, int k)
        : Error(what + " at node (" + std::to_string(j) + ", " + std::to_string(k) + ")"), j(j), k(k) {}
    int j, k;
};

class PositivityError : public Error {
public:
    using Error::Error;
};

class SingularMetricError : public Error {
public:
    using Error::Error;
};

class BranchError : public Error {
public:
    using Error::Error;
};

class ConvergenceError : public Error {
public:
    using Error::Error;
};

class SingularOperatorError : public Error {
public:
    using Error::Error;
};

} // namespace caslab
