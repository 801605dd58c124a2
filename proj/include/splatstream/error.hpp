#pragma once

#include <stdexcept>
#include <string>

namespace splatstream {

// Base class for every error this library raises on purpose.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// PLY / container header is not what we expect.
struct FormatError : Error {
    using Error::Error;
};

// Payload ends before the declared element count.
struct TruncationError : Error {
    using Error::Error;
};

// Header parsed fine but the declared schema is wrong (missing property etc.).
struct SchemaError : Error {
    using Error::Error;
};

// A field value is outside its domain (non-finite, negative size, ...).
struct ValueError : Error {
    using Error::Error;
};

// A caller-supplied parameter violates an operation precondition.
struct ParameterError : Error {
    using Error::Error;
};

// Index or frame number out of range.
struct RangeError : Error {
    using Error::Error;
};

// Input too small / rank-deficient for a geometric solve.
struct DegenerateInputError : Error {
    using Error::Error;
};

// Knapsack has no feasible assignment (even all-minimum exceeds budget).
struct InfeasibleError : Error {
    using Error::Error;
};

// Instance too large for exhaustive enumeration.
struct SizeError : Error {
    using Error::Error;
};

// A trace does not cover the video it is supposed to drive.
struct TraceCoverageError : Error {
    using Error::Error;
};

}  // namespace splatstream
