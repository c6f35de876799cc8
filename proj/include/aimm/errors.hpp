#pragma once

#include <stdexcept>
#include <string>

namespace aimm {

// Error taxonomy. Everything user-facing derives from Error so the CLI can
// map categories to exit codes without string matching.

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad values: out-of-range config fields, non-finite inputs, empty datasets.
class ValidationError : public Error {
public:
    using Error::Error;
};

// Shape mismatches: vector dimension disagreements, bad matrix indices.
class StructuralError : public Error {
public:
    using Error::Error;
};

// Training produced a non-finite loss or parameter. Aborts the run.
class DivergenceError : public Error {
public:
    using Error::Error;
};

// File I/O: unreadable paths, bad magic, truncated payloads.
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace aimm
