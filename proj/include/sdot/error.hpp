#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace sdot {

enum class ErrorKind {
    parameter,
    geometry,
    perturbation,
    convergence,
    degeneracy,
    data,
    state,
    sampling,
    resolution,
    config,
    io,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + " error: " + what), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

// Thrown when an iterative method exhausts its budget. Carries the residual
// trace so callers can inspect how far it got.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, std::vector<double> history)
        : Error(ErrorKind::convergence, what), history_(std::move(history)) {}

    const std::vector<double>& history() const { return history_; }

private:
    std::vector<double> history_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

// CLI exit code for an error kind: 2 config/parameter, 3 convergence, 4 geometry.
int exit_code(ErrorKind kind);

}  // namespace sdot
