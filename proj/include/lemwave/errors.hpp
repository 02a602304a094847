#pragma once

#include <stdexcept>
#include <string>

namespace lemwave {

/// Root of every exception thrown by the library. The CLI maps the three
/// subclasses below onto distinct exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid user input: bad parameters, malformed config files, violated
/// preconditions on public entry points.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Failures of the numerical machinery.
class NumericalError : public Error {
public:
    using Error::Error;
};

class SingularSystemError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class DivergenceError : public NumericalError {
public:
    DivergenceError(std::size_t step, const std::string& what)
        : NumericalError(what), step_(step) {}
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

class AssemblyDefectError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Mesh-level failures (triangulation, connectivity after crack insertion).
class MeshError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class DegenerateTriangulationError : public MeshError {
public:
    using MeshError::MeshError;
};

class FloatingComponentError : public MeshError {
public:
    using MeshError::MeshError;
};

/// File-system and file-format failures.
class IoError : public Error {
public:
    using Error::Error;
};

class CorruptionError : public IoError {
public:
    using IoError::IoError;
};

}  // namespace lemwave
