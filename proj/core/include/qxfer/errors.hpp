#pragma once

#include <stdexcept>
#include <string>

namespace qxfer {

// Error taxonomy. The four bases map one-to-one onto the CLI exit codes
// (usage 2, input 3, solver 4, io 5); see FORMATS.md.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad command line or parameter file: unknown keys, out-of-range values.
class UsageError : public Error {
public:
    using Error::Error;
};

// Structurally invalid data fed into the model layer.
class InputError : public Error {
public:
    using Error::Error;
};

// Numerical failure surfaced as a hard error rather than a status.
class SolverError : public Error {
public:
    using Error::Error;
};

// Filesystem trouble while reading or writing artifacts.
class IoError : public Error {
public:
    using Error::Error;
};

// min_separation cannot be satisfied inside the sphere within the retry budget.
class SeparationUnsatisfiable : public InputError {
public:
    using InputError::InputError;
};

// Defensive re-check in build_model found a pair closer than min_separation.
class DegenerateGeometry : public InputError {
public:
    using InputError::InputError;
};

// Degenerate or inverted gamma grid specification.
class BadSpec : public UsageError {
public:
    using UsageError::UsageError;
};

// Histogram column holds no converged sample.
class EmptyColumn : public SolverError {
public:
    using SolverError::SolverError;
};

// Purity requested for a state with vanishing excited-block trace.
class EmptyState : public SolverError {
public:
    using SolverError::SolverError;
};

// Every optimizer evaluation across all restarts failed to converge.
class NoConvergedEvaluation : public SolverError {
public:
    using SolverError::SolverError;
};

} // namespace qxfer
