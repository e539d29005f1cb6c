#pragma once

#include <stdexcept>
#include <string>

namespace datn {

// Shape/dimension mismatches between tensors or against an op contract.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A value violates an op precondition (non-scalar loss, non-binary mask, ...).
struct ValueError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid configuration; message names the offending field or key.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input file; message carries path and byte offset where known.
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Filesystem failure; message carries the path.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Checkpoint does not match the network it is loaded into.
struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite loss or gradient encountered during optimization.
struct NonFiniteError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace datn
