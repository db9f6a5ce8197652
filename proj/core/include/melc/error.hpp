#pragma once

#include <stdexcept>
#include <string>

namespace melc {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionMismatch : Error {
    using Error::Error;
};

// All projections of one class coincide; the Silverman bandwidth is undefined.
// Objective-level callers map this to a -inf value (rejected step).
struct DegenerateProjection : Error {
    using Error::Error;
};

struct EmptyInput : Error {
    using Error::Error;
};

struct NonPositiveVariance : Error {
    using Error::Error;
};

struct NonFiniteObjective : Error {
    using Error::Error;
};

struct AllRunsFailed : Error {
    using Error::Error;
};

struct LengthMismatch : Error {
    using Error::Error;
};

struct ParseError : Error {
    ParseError(const std::string& path, std::size_t line, const std::string& what)
        : Error(path + ":" + std::to_string(line) + ": " + what), line_number(line) {}
    std::size_t line_number;
};

struct NotBinary : Error {
    using Error::Error;
};

struct TooSmallClass : Error {
    using Error::Error;
};

struct RaggedRows : Error {
    using Error::Error;
};

struct TooFewPointsPerClass : Error {
    using Error::Error;
};

struct EmptyRecords : Error {
    using Error::Error;
};

struct IoFailure : Error {
    using Error::Error;
};

}  // namespace melc
