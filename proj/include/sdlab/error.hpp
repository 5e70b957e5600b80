#pragma once

#include <stdexcept>
#include <string>

namespace sdlab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
public:
    using Error::Error;
};

class DegenerateDesign : public Error {
public:
    using Error::Error;
};

/// An iterative solver stopped without meeting its tolerance.
class SolverError : public Error {
public:
    SolverError(const std::string& what, double residual);
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

class BracketingError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class StepSizeError : public Error {
public:
    using Error::Error;
};

class InconsistentSolution : public Error {
public:
    using Error::Error;
};

/// Process exit code for an error: 1 invalid input, 2 I/O, 3 solver.
int exit_code_for(const Error& e) noexcept;

}  // namespace sdlab
