#pragma once

#include <stdexcept>
#include <string>

namespace graphwave {

// Base of every error raised by the library. Callers that only care about
// "something in graphwave failed" catch this.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A precondition on an argument was violated (bad speeds, mismatched grids...).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

// The requested stationary profile does not exist for the given parameters.
class NoSolution : public Error {
public:
    using Error::Error;
};

// A norm or form containing 1/lambda was requested with lambda == 0.
class UndefinedForZeroLambda : public Error {
public:
    UndefinedForZeroLambda()
        : Error("lambda == 0: the 1/lambda vertex term is undefined; "
                "use VertexCondition::kirchhoff_limit() instead") {}
};

class SingularSystem : public Error {
public:
    using Error::Error;
};

class SolverNonConvergence : public Error {
public:
    using Error::Error;
};

// Adjacent parameter values could not be matched by eigenvector overlap.
class BranchMatchingError : public Error {
public:
    using Error::Error;
};

// The growth window of a trajectory contains too few samples for a fit.
class EmptyFitWindow : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& what)
        : Error("config field '" + field + "': " + what), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

}  // namespace graphwave
