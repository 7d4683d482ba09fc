#pragma once

#include <stdexcept>
#include <string>

namespace phinv {

/// Base class for every error raised by the library. The CLI maps the
/// concrete subclasses onto process exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent configuration (CLI exit code 2).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Dispersion coefficients that are malformed, asymmetric, or give ω² < 0.
class InvalidDispersion : public Error {
public:
    using Error::Error;
};

/// Derivative requested at a point where ω(k) < eps0, i.e. close to the
/// zero set of ω where it stops being C².
class NearSingularSet : public Error {
public:
    using Error::Error;
};

class GridMismatch : public Error {
public:
    using Error::Error;
};

class CapacityExceeded : public Error {
public:
    using Error::Error;
};

class EmptyConstraintSet : public Error {
public:
    using Error::Error;
};

class ConvergenceFailure : public Error {
public:
    using Error::Error;
};

/// Bump support too close to the boundary of the cell or to near-singular
/// grid points.
class SupportViolation : public Error {
public:
    using Error::Error;
};

/// Moment matrix B(f) too badly conditioned to invert for this test function.
class IllConditionedB : public Error {
public:
    IllConditionedB(const std::string& what, double cond) : Error(what), cond_(cond) {}
    double cond() const noexcept { return cond_; }

private:
    double cond_;
};

/// Fewer admissible test functions than the scalarity check needs.
class InsufficientTestFunctions : public Error {
public:
    using Error::Error;
};

}  // namespace phinv
